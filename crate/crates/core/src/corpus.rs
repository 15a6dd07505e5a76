//! Seeded corpus generators shared by the experiment runner and the
//! acceptance suite. Every item is a pure function of `(seed, index)`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::experiments::{random_spectra, ExperimentConfig, FamilyParams, SignalParams};
use crate::interval::{int, rat, DisjointFamily, Interval, Rational};
use crate::lattice::{LatticeSignal, LatticeSpec};
use crate::rng::StreamRng;

fn case_rng(seed: u64, idx: usize) -> StreamRng {
    StreamRng::new(seed).stream(idx as u64)
}

/// Denominators used for random rational endpoints.
const DENOMS: [i64; 6] = [1, 2, 3, 4, 8, 16];

fn random_rational<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Rational {
    let den = DENOMS[rng.random_range(0..DENOMS.len())];
    let lo_n = (lo * den as f64).ceil() as i64;
    let hi_n = (hi * den as f64).floor() as i64;
    rat(rng.random_range(lo_n..=hi_n.max(lo_n)), den)
}

/// 1 to 8 intervals with log-uniform lengths in `[4, 2^16]`, rational
/// endpoints and gaps that are zero a quarter of the time.
pub fn decomposition_family(seed: u64, idx: usize) -> DisjointFamily {
    let mut rng = case_rng(seed, idx);
    let count = rng.random_range(1..=8usize);
    let mut left = random_rational(&mut rng, -1000.0, 1000.0);
    let mut ivs = Vec::with_capacity(count);
    for _ in 0..count {
        let e: f64 = rng.random_range(2.0..16.0);
        let len = random_rational(&mut rng, 2f64.powf(e).max(4.0), 2f64.powf(e + 0.25).min(65536.0));
        let right = &left + &len;
        ivs.push(Interval::new(left, right.clone()).expect("positive length"));
        left = if rng.random_range(0..4) == 0 {
            right
        } else {
            let scale = 2f64.powf(rng.random_range(0.0..12.0));
            let gap = rng.random_range(0.0..scale);
            right + random_rational(&mut rng, gap, gap + 1.0)
        };
    }
    DisjointFamily::new(ivs).expect("increasing disjoint intervals")
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirichletInstance {
    pub gamma: Vec<f64>,
    pub alpha: Vec<Complex64>,
    pub interval: Interval,
}

/// 1 to 16 frequencies on the grid `Z/8` with gaps in `[1, 4)`, Gaussian coefficients and an
/// interval of length in `[1/16, 16]`.
pub fn dirichlet_instance(seed: u64, idx: usize) -> DirichletInstance {
    let mut rng = case_rng(seed, idx);
    let count = rng.random_range(1..=16usize);
    let mut g = rng.random_range(-80..=80i64) as f64 / 8.0;
    let mut gamma = Vec::with_capacity(count);
    for i in 0..count {
        if i > 0 {
            g += if rng.random_range(0..3) == 0 { 1.0 } else { rng.random_range(8..32i64) as f64 / 8.0 };
        }
        gamma.push(g);
    }
    let alpha = (0..count)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let a = random_rational(&mut rng, -8.0, 8.0);
    let len = random_rational(&mut rng, 1.0 / 16.0, 16.0).max(rat(1, 16));
    DirichletInstance {
        gamma,
        alpha,
        interval: Interval::new(a.clone(), a + len).expect("positive length"),
    }
}

/// Row matrix `h` (1 to 8 rows of length 1 to 16) and vectors `a_j` in
/// `spec`, all with Gaussian entries.
pub fn riesz_instance(seed: u64, idx: usize, spec: LatticeSpec) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
    let mut rng = case_rng(seed, idx);
    let rows = rng.random_range(1..=8usize);
    let cols = rng.random_range(1..=16usize);
    let mut gauss = |len: usize| -> Vec<Complex64> {
        (0..len)
            .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect()
    };
    let h = (0..rows).map(|_| gauss(cols)).collect();
    let a = (0..rows).map(|_| gauss(spec.d)).collect();
    (h, a)
}

/// Mean-zero band-limited signal on `n` points of period 1. Scalar specs get
/// real samples so the fast sharp-function path applies.
pub fn mean_zero_signal(seed: u64, idx: usize, n: usize, spec: LatticeSpec, band: usize) -> Result<LatticeSignal> {
    let mut rng = case_rng(seed, idx);
    let spectra = random_spectra(&mut rng, n, 1, band, 0.5, spec.d)?;
    let chans = spectra
        .into_iter()
        .map(|s| {
            let mut c = s.coeffs().to_vec();
            c[0] = Complex64::new(0.0, 0.0);
            let mut g = crate::spectral::Spectrum::new(c, int(1))?.to_signal();
            if spec.d == 1 {
                g = crate::spectral::GridSignal::new(g.samples().iter().map(|v| Complex64::new(v.re, 0.0)).collect(), int(1))?;
            }
            Ok(g)
        })
        .collect::<Result<Vec<_>>>()?;
    LatticeSignal::from_channels(spec, &chans)
}

/// The well-distributed domination corpus: separated families of 1 to 8
/// intervals of 4 to 32 bins inside a 64-bin band.
pub fn domination_config(n: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        n,
        period: 1,
        p: 2.0,
        lattice: LatticeSpec::scalar(),
        family: FamilyParams::default(),
        signal: SignalParams { band: 64, decay: 0.0 },
        cases: 100,
        seed,
        trials: 256,
        refine_rounds: 0,
        rad_mode: None,
    }
}

/// `{(0,20], (30,50]}`.
pub fn standard_kernel_family() -> DisjointFamily {
    DisjointFamily::from_ints(&[(0, 20), (30, 50)]).expect("fixed family")
}

/// `value` on `(lo, hi]` sampled on `n` cells of width `period / n` starting
/// at `origin`; returned with the origin.
pub fn window_signal(spec: LatticeSpec, period: i64, n: usize, origin: f64, lo: f64, hi: f64, value: &[Complex64]) -> Result<LatticeSignal> {
    let h = period as f64 / n as f64;
    let zero = vec![Complex64::new(0.0, 0.0); spec.d];
    let mut values = Vec::with_capacity(n * spec.d);
    for i in 0..n {
        let mid = origin + h * (i as f64 + 0.5);
        values.extend_from_slice(if mid > lo && mid <= hi { value } else { &zero });
    }
    LatticeSignal::new(spec, int(period), values)
}
