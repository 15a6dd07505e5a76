//! Regression checks for the pinned constants that sit outside the
//! acceptance criteria.

use rayon::prelude::*;

use lprkit::corpus::*;
use lprkit::experiments::*;
use lprkit::fixtures::*;
use lprkit::interval::Interval;
use lprkit::kernel::*;
use lprkit::lattice::LatticeSpec;
use lprkit::maximal::maximal_norm_report;
use lprkit::rademacher::{riesz_transfer_check, SignSource};
use lprkit::spectral::make_adapted_bump;

#[test]
fn rad_fixture_regression() {
    let cfg = rad_fixture_config();
    let case = generate_case(&cfg, 0).unwrap();
    let r = lpr_rad_ratio(&case.signal(cfg.lattice), &case.family, cfg.p, &cfg.sign_source(case.seed), RadMode::Direct).unwrap();
    assert_eq!(case.family.len(), 8);
    assert!((r.value - RAD_FIXTURE).abs() <= 1e-12 * RAD_FIXTURE, "{:?}", r.value);
}

#[test]
fn direct_and_dyadic_are_comparable() {
    let cfg = comparison_config();
    let k = (0..cfg.cases)
        .into_par_iter()
        .map(|i| {
            let case = generate_case(&cfg, i).unwrap();
            let f = case.signal(cfg.lattice);
            let src = cfg.sign_source(case.seed);
            let a = lpr_rad_ratio(&f, &case.family, cfg.p, &src, RadMode::Direct).unwrap().value;
            let b = lpr_rad_ratio(&f, &case.family, cfg.p, &src, RadMode::Dyadic).unwrap().value;
            (a / b).max(b / a)
        })
        .reduce(|| 0.0, f64::max);
    assert!(k <= COMPARISON_BOUND, "K = {k}");
}

#[test]
fn riesz_transfer_within_bounds() {
    for (spec, bound) in riesz_specs().into_iter().zip(RIESZ_BOUND) {
        let src = SignSource::new(RIESZ_SEED, 256);
        let m = (0..RIESZ_CASES)
            .into_par_iter()
            .map(|i| {
                let (h, a) = riesz_instance(RIESZ_SEED, i, spec);
                riesz_transfer_check(&h, &a, spec, &src).unwrap().ratio
            })
            .reduce(|| 0.0, f64::max);
        assert!(m <= bound, "d={} r={}: {m} > {bound}", spec.d, spec.r);
    }
}

#[test]
fn bump_decay_and_vector_kernel() {
    let bump = make_adapted_bump().unwrap();
    assert!(bump.decay_constant() <= BUMP_DECAY_BOUND);
    let spec = KernelSpec::new(&standard_kernel_family(), bump).unwrap();
    let ms: Vec<u32> = (1..=4).collect();
    let rep = decay_fit(&spec, LatticeSpec::new(2, 4.0).unwrap(), DECAY_X, DECAY_Z, &ms, DECAY_SAMPLES, DECAY_SEED).unwrap();
    assert!(rep.max_sum_mu_sq <= MU_SQ_BOUND, "{}", rep.max_sum_mu_sq);
    assert!(rep.rows.iter().all(|r| r.r_m <= DECAY_R_BOUND));
}

#[test]
fn bmo_oscillation_of_indicator() {
    let spec = KernelSpec::new(&standard_kernel_family(), make_adapted_bump().unwrap()).unwrap();
    let (f, origin) = bmo_signal().unwrap();
    let iv = Interval::from_ints(0, 4).unwrap();
    let rep = bmo_oscillation_report(&spec, &f, origin, &iv, &SignSource::new(BMO_SEED, BMO_TRIALS)).unwrap();
    assert!(rep.a >= 0.0 && rep.b >= 0.0);
    assert!(rep.a + rep.b <= BMO_BOUND, "A {} B {}", rep.a, rep.b);
}

#[test]
fn sharp_function_bound_at_p2() {
    let (spec, n, cases) = maximal_corpora()[0];
    let m = (0..cases)
        .into_par_iter()
        .map(|i| {
            let f = mean_zero_signal(MAXIMAL_SEED, i, n, spec, n / 8).unwrap();
            maximal_norm_report(&f, 2.0, 2.0).unwrap().fs_ratio.unwrap()
        })
        .reduce(|| 0.0, f64::max);
    assert!(m <= FS_BOUND[0], "{m}");
}
