//! Frozen corpora and the empirical constants pinned from pilot runs of
//! `examples/pilot.rs`. Bounds carry a small margin over the pilot maxima.

use num_complex::Complex64;

use crate::corpus::window_signal;
use crate::error::Result;
use crate::experiments::{ExperimentConfig, FamilyParams, RadMode, SignalParams};
use crate::lattice::{LatticeSignal, LatticeSpec};

pub const DECOMPOSITION_SEED: u64 = 0x0D0D_2024;
pub const DECOMPOSITION_CASES: usize = 10_000;
/// Largest side degree seen on the decomposition corpus.
pub const DEGREE_BOUND: usize = 4;
/// Fraction of corpus families whose mod-3 classes were all disjoint.
pub const MOD3_FRACTION: f64 = 1.0;

pub const DOMINATION_SEED: u64 = 0xD0_4417;
pub const DOMINATION_BOUND: f64 = 0.42;
/// Pilot maxima at `N = 1024` and `N = 2048`.
pub const DOMINATION_PILOT: [f64; 2] = [0.40543893424470323, 0.40532421995300966];

pub const MAXIMAL_SEED: u64 = 0x5A4B;

/// `(spec, N, cases)` for the mean-zero maximal corpora.
pub fn maximal_corpora() -> Vec<(LatticeSpec, usize, usize)> {
    vec![
        (LatticeSpec::scalar(), 1024, 100),
        (LatticeSpec::new(2, 2.0).expect("valid"), 128, 30),
        (LatticeSpec::new(3, 4.0).expect("valid"), 128, 30),
    ]
}

/// `C_FS*` for `p = 2, 4, 8`.
pub const FS_BOUND: [f64; 3] = [1.14, 1.49, 2.17];
/// `C_M*(p, 2)` for `p = 4, 8`.
pub const MQ_BOUND: [f64; 2] = [1.43, 1.30];

pub const DECAY_X: f64 = 1.0;
pub const DECAY_Z: f64 = 0.0;
pub const DECAY_SEED: u64 = 0xDECA_7;
pub const DECAY_SAMPLES: usize = 8;
pub const DECAY_SLOPE_MAX: f64 = -5.0 / 3.0 + 0.2;
/// `R*`: bound on `r_m = A_m 2^{5m/3}|x - z|`, `m = 1..=8`.
pub const DECAY_R_BOUND: f64 = 5.0e-3;
/// Bound on `Σ_k μ_k²` for unit-normalized `λ`.
pub const MU_SQ_BOUND: f64 = 1.1;
/// `C_ψ`: bound on `max |x|² |ψ(x)|`.
pub const BUMP_DECAY_BOUND: f64 = 0.37;

pub const DIRICHLET_SEED: u64 = 0xD1_41C7;
pub const DIRICHLET_CASES: usize = 1000;
/// `G*`.
pub const DIRICHLET_BOUND: f64 = 1.19;

pub const BMO_SEED: u64 = 0xB30;
/// `O*`: bound on `A + B`.
pub const BMO_BOUND: f64 = 1.05;

/// `f ≡ 1` on `(-64, 64]` over cells of width `1/64`, and its grid origin.
pub fn bmo_signal() -> Result<(LatticeSignal, f64)> {
    let origin = -128.0;
    let f = window_signal(LatticeSpec::scalar(), 256, 16384, origin, -64.0, 64.0, &[Complex64::new(1.0, 0.0)])?;
    Ok((f, origin))
}

pub const RIESZ_SEED: u64 = 0x21E5;
pub const RIESZ_CASES: usize = 1000;

pub fn riesz_specs() -> Vec<LatticeSpec> {
    vec![
        LatticeSpec::new(2, 1.0).expect("valid"),
        LatticeSpec::new(3, 1.5).expect("valid"),
        LatticeSpec::new(2, 2.0).expect("valid"),
    ]
}

/// `c'(r, d)` in the order of [`riesz_specs`].
pub const RIESZ_BOUND: [f64; 3] = [1.07, 1.05, 1.05];

/// Seed `0xC0FFEE`, `N = 1024`, eight intervals, `p = 4`: case 0.
pub fn rad_fixture_config() -> ExperimentConfig {
    ExperimentConfig {
        seed: 0xC0FFEE,
        cases: 1,
        p: 4.0,
        family: FamilyParams {
            min_intervals: 8,
            max_intervals: 8,
            ..FamilyParams::default()
        },
        refine_rounds: 0,
        rad_mode: Some(RadMode::Direct),
        ..ExperimentConfig::default()
    }
}

pub const RAD_FIXTURE: f64 = 1.021111649289844;

/// Direct against dyadic Rademacher ratios.
pub fn comparison_config() -> ExperimentConfig {
    ExperimentConfig {
        seed: 0xC0A1,
        cases: 40,
        p: 4.0,
        n: 512,
        family: FamilyParams {
            min_intervals: 1,
            max_intervals: 4,
            min_len: 4,
            max_len: 32,
            covering: false,
        },
        signal: SignalParams { band: 64, decay: 0.0 },
        refine_rounds: 0,
        ..ExperimentConfig::default()
    }
}

/// `K*`.
pub const COMPARISON_BOUND: f64 = 1.51;

/// `p = 4`, `N = 1024`, 500 cases, seed 7.
pub fn constant_config() -> ExperimentConfig {
    ExperimentConfig {
        seed: 7,
        cases: 500,
        p: 4.0,
        n: 1024,
        ..ExperimentConfig::default()
    }
}

pub const CONSTANT_FIXTURE: f64 = 0.9527461180277267;
pub const CONSTANT_ARGMAX: usize = 189;
