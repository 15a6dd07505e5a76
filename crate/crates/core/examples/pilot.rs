//! Pilot runs behind the frozen constants in `lprkit::fixtures`.
//!
//! `cargo run --release -p lprkit --example pilot [section...]`

use std::time::Instant;

use rayon::prelude::*;

use lprkit::corpus::*;
use lprkit::experiments::*;
use lprkit::fixtures::*;
use lprkit::interval::*;
use lprkit::kernel::*;
use lprkit::lattice::LatticeSpec;
use lprkit::maximal::maximal_norm_report;
use lprkit::rademacher::{riesz_transfer_check, SignSource};
use lprkit::spectral::make_adapted_bump;

fn decomposition() {
    let t = Instant::now();
    let stats: Vec<(usize, usize, bool, bool, usize)> = (0..DECOMPOSITION_CASES)
        .into_par_iter()
        .map(|i| {
            let fam = decomposition_family(DECOMPOSITION_SEED, i);
            let dec = dyadic_decompose(&fam).unwrap();
            let v = dec.invariant_violations().len();
            let da = well_distributed_degree(&dec.side_family(Side::A));
            let db = well_distributed_degree(&dec.side_family(Side::B));
            let ma = split_mod3(&dec, Side::A).all_disjoint();
            let mb = split_mod3(&dec, Side::B).all_disjoint();
            (da, db, ma, mb, v)
        })
        .collect();
    let max_deg = stats.iter().map(|s| s.0.max(s.1)).max().unwrap();
    let mod3 = stats.iter().filter(|s| s.2 && s.3).count() as f64 / stats.len() as f64;
    let viol: usize = stats.iter().map(|s| s.4).sum();
    println!("decomposition: D* = {max_deg}, mod3 fraction = {mod3}, violations = {viol}, {:?}", t.elapsed());
}

fn domination() {
    let bump = make_adapted_bump().unwrap();
    for n in [1024, 2048] {
        let t = Instant::now();
        let cfg = domination_config(n, DOMINATION_SEED);
        let ratios: Vec<(f64, usize)> = (0..cfg.cases)
            .into_par_iter()
            .map(|i| {
                let case = generate_case(&cfg, i).unwrap();
                let r = g_domination_report(&case.signal(cfg.lattice), &case.family, &bump).unwrap();
                (r.dom_ratio, r.degree)
            })
            .collect();
        let max = ratios.iter().map(|r| r.0).fold(0.0, f64::max);
        let deg = ratios.iter().map(|r| r.1).max().unwrap();
        println!("domination N={n}: max {max}, max degree {deg}, {:?}", t.elapsed());
    }
}

fn maximal() {
    for (spec, n, cases) in maximal_corpora() {
        for p in [2.0, 4.0, 8.0] {
            let t = Instant::now();
            let reps: Vec<_> = (0..cases)
                .into_par_iter()
                .map(|i| maximal_norm_report(&mean_zero_signal(MAXIMAL_SEED, i, n, spec, n / 8).unwrap(), p, 2.0).unwrap())
                .collect();
            let fs = reps.iter().filter_map(|r| r.fs_ratio).fold(0.0, f64::max);
            let mq = reps.iter().filter_map(|r| r.mq_bound).fold(0.0, f64::max);
            let gap = reps.iter().filter_map(|r| r.concavification_gap).fold(0.0, f64::max);
            println!("maximal d={} r={} p={p}: fs {fs} mq {mq} gap {gap:e} {:?}", spec.d, spec.r, t.elapsed());
        }
    }
}

fn kernel() {
    let t = Instant::now();
    let spec = KernelSpec::new(&standard_kernel_family(), make_adapted_bump().unwrap()).unwrap();
    let ms: Vec<u32> = (1..=8).collect();
    let rep = decay_fit(&spec, LatticeSpec::scalar(), DECAY_X, DECAY_Z, &ms, DECAY_SAMPLES, DECAY_SEED).unwrap();
    for r in &rep.rows {
        println!("  m={} A={:e} r={:e}", r.m, r.a_m, r.r_m);
    }
    println!("kernel: slope {:?} Σμ² {} {:?}", rep.slope, rep.max_sum_mu_sq, t.elapsed());
    let lat = LatticeSpec::new(2, 4.0).unwrap();
    let rep = decay_fit(&spec, lat, DECAY_X, DECAY_Z, &ms, DECAY_SAMPLES, DECAY_SEED).unwrap();
    println!("kernel ℓ⁴₂: slope {:?} max r {:e} Σμ² {} {:?}", rep.slope, rep.rows.iter().map(|r| r.r_m).fold(0.0, f64::max), rep.max_sum_mu_sq, t.elapsed());
    let src = SignSource::new(DECAY_SEED, BMO_TRIALS);
    for m in 1..=5 {
        let ov = alpha_overlay(&spec, LatticeSpec::scalar(), DECAY_X, DECAY_Z, m, &random_lambda(&spec, 1, DECAY_SEED), &src).unwrap();
        println!("  overlay m={m}: k0 {} k1 {} c {}", ov.k0, ov.k1, ov.fitted_c);
    }
    println!("bump C_ψ = {}", make_adapted_bump().unwrap().decay_constant());
}

fn dirichlet() {
    let t = Instant::now();
    let g = (0..DIRICHLET_CASES)
        .into_par_iter()
        .map(|i| {
            let d = dirichlet_instance(DIRICHLET_SEED, i);
            dirichlet_gap_ratio(&d.gamma, &d.alpha, &d.interval).unwrap()
        })
        .reduce(|| 0.0, f64::max);
    println!("dirichlet: G* {g} {:?}", t.elapsed());
}

fn bmo() {
    let t = Instant::now();
    let spec = KernelSpec::new(&standard_kernel_family(), make_adapted_bump().unwrap()).unwrap();
    let (f, origin) = bmo_signal().unwrap();
    let iv = Interval::from_ints(0, 4).unwrap();
    let rep = bmo_oscillation_report(&spec, &f, origin, &iv, &SignSource::new(BMO_SEED, BMO_TRIALS)).unwrap();
    println!("bmo: A {} B {} {:?}", rep.a, rep.b, t.elapsed());
}

fn riesz() {
    for spec in riesz_specs() {
        let t = Instant::now();
        let src = SignSource::new(RIESZ_SEED, 256);
        let m = (0..RIESZ_CASES)
            .into_par_iter()
            .map(|i| {
                let (h, a) = riesz_instance(RIESZ_SEED, i, spec);
                riesz_transfer_check(&h, &a, spec, &src).unwrap().ratio
            })
            .reduce(|| 0.0, f64::max);
        println!("riesz d={} r={}: c' {m} {:?}", spec.d, spec.r, t.elapsed());
    }
}

fn rad() {
    let t = Instant::now();
    let cfg = rad_fixture_config();
    let case = generate_case(&cfg, 0).unwrap();
    let f = case.signal(cfg.lattice);
    let r = lpr_rad_ratio(&f, &case.family, cfg.p, &cfg.sign_source(case.seed), RadMode::Direct).unwrap();
    println!("rad 0xC0FFEE: {:?} ± {} ({} intervals) {:?}", r.value, r.stderr, case.family.len(), t.elapsed());

    let t = Instant::now();
    let cfg = comparison_config();
    let pairs: Vec<(f64, f64)> = (0..cfg.cases)
        .into_par_iter()
        .map(|i| {
            let case = generate_case(&cfg, i).unwrap();
            let f = case.signal(cfg.lattice);
            let src = cfg.sign_source(case.seed);
            let a = lpr_rad_ratio(&f, &case.family, cfg.p, &src, RadMode::Direct).unwrap().value;
            let b = lpr_rad_ratio(&f, &case.family, cfg.p, &src, RadMode::Dyadic).unwrap().value;
            (a, b)
        })
        .collect();
    let k = pairs.iter().map(|(a, b)| (a / b).max(b / a)).fold(0.0, f64::max);
    println!("dyadic vs direct: K* {k} {:?}", t.elapsed());
}

fn constant() {
    let t = Instant::now();
    let rep = estimate_constant(&constant_config()).unwrap();
    println!("constant: max {:?} argmax {:?} seed {:?} {:?}", rep.max, rep.argmax, rep.argmax_seed, t.elapsed());
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let all = args.is_empty();
    let want = |s: &str| all || args.iter().any(|a| a == s);
    if want("decomposition") {
        decomposition();
    }
    if want("domination") {
        domination();
    }
    if want("maximal") {
        maximal();
    }
    if want("kernel") {
        kernel();
    }
    if want("dirichlet") {
        dirichlet();
    }
    if want("bmo") {
        bmo();
    }
    if want("riesz") {
        riesz();
    }
    if want("rad") {
        rad();
    }
    if want("constant") {
        constant();
    }
}
