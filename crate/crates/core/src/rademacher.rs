//! Rademacher averages `‖Σ ε_j x_j‖_{L^p(Rad X)}`, their double-indexed
//! variant, and numerical checks of contraction, Khintchine-type
//! equivalences, the α-property and the cotype-2 transfer bound.
//!
//! Small sign systems (`2^n ≤ 4096`) are enumerated exhaustively, so the
//! estimates are exact averages; larger ones are sampled by trial from a
//! counter-based stream.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::lattice::{exponent, lr_norm, mixed_norm, square_sum, LatticeSignal, LatticeSpec};
use crate::rng::{StreamRng, GENERATOR_ID};

/// Sign systems of at most this many variables are enumerated.
pub const EXHAUSTIVE_MAX_SIGNS: usize = 12;
pub const MIN_TRIALS: usize = 64;
pub const BOOTSTRAP_ROUNDS: usize = 256;
const BOOTSTRAP_STREAM: u64 = u64::MAX;

/// `T × n` matrix of signs.
#[derive(Clone, Debug, PartialEq)]
pub struct SignEnsemble {
    n: usize,
    trials: usize,
    seed: u64,
    exhaustive: bool,
    signs: Vec<i8>,
}

impl SignEnsemble {
    /// Exhaustive when `n ≤ 12`, otherwise `trials` sampled rows.
    pub fn new(n: usize, seed: u64, trials: usize) -> Result<Self> {
        if n <= EXHAUSTIVE_MAX_SIGNS {
            Self::exhaustive(n, seed)
        } else {
            Self::monte_carlo(n, seed, trials)
        }
    }

    pub fn exhaustive(n: usize, seed: u64) -> Result<Self> {
        precondition!(n <= 20, "refusing to enumerate 2^{n} sign patterns");
        let trials = 1usize << n;
        let mut signs = Vec::with_capacity(trials * n);
        for t in 0..trials {
            signs.extend((0..n).map(|j| if (t >> j) & 1 == 1 { -1i8 } else { 1 }));
        }
        Ok(Self {
            n,
            trials,
            seed,
            exhaustive: true,
            signs,
        })
    }

    pub fn monte_carlo(n: usize, seed: u64, trials: usize) -> Result<Self> {
        precondition!(trials >= MIN_TRIALS, "{trials} trials, at least {MIN_TRIALS} required");
        let root = StreamRng::new(seed);
        let mut signs = Vec::with_capacity(trials * n);
        for t in 0..trials {
            let s = root.stream(t as u64);
            let mut word = 0u64;
            for j in 0..n {
                if j % 64 == 0 {
                    word = s.at((j / 64) as u64);
                }
                signs.push(if (word >> (j % 64)) & 1 == 1 { -1 } else { 1 });
            }
        }
        Ok(Self {
            n,
            trials,
            seed,
            exhaustive: false,
            signs,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_exhaustive(&self) -> bool {
        self.exhaustive
    }

    pub fn generator_id(&self) -> &'static str {
        if self.exhaustive {
            "exhaustive"
        } else {
            GENERATOR_ID
        }
    }

    pub fn row(&self, t: usize) -> &[i8] {
        &self.signs[t * self.n..(t + 1) * self.n]
    }
}

/// Seed and trial count from which ensembles of any width are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignSource {
    pub seed: u64,
    pub trials: usize,
}

impl SignSource {
    pub fn new(seed: u64, trials: usize) -> Self {
        Self { seed, trials }
    }

    pub fn ensemble(&self, n: usize) -> Result<SignEnsemble> {
        SignEnsemble::new(n, self.seed, self.trials)
    }
}

impl Default for SignSource {
    fn default() -> Self {
        Self { seed: 0, trials: 512 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadEstimate {
    pub value: f64,
    pub stderr: f64,
    #[serde(with = "exponent")]
    pub p: f64,
    pub trials: usize,
    pub seed: u64,
    pub exhaustive: bool,
    pub generator: String,
}

/// Flat terms `x_j`, each `rows × d` row-major, measured in
/// `L^p(rows; ℓ^r_d)` with the normalized counting measure.
#[derive(Clone, Debug)]
pub struct Terms<'a> {
    xs: Vec<&'a [Complex64]>,
    spec: LatticeSpec,
    len: usize,
}

impl<'a> Terms<'a> {
    pub fn new(xs: Vec<&'a [Complex64]>, spec: LatticeSpec) -> Result<Self> {
        let len = xs.first().map_or(spec.d, |x| x.len());
        precondition!(len > 0 && len % spec.d == 0, "term length {len} is not a multiple of d = {}", spec.d);
        for x in &xs {
            precondition!(x.len() == len, "terms of unequal length");
        }
        Ok(Self { xs, spec, len })
    }

    pub fn from_signals(gs: &'a [LatticeSignal]) -> Result<Self> {
        if let Some(g0) = gs.first() {
            for g in gs {
                precondition!(g.same_grid(g0), "signals on different grids or specs");
            }
        }
        let spec = gs.first().map_or(LatticeSpec::scalar(), |g| g.spec());
        Self::new(gs.iter().map(|g| g.values()).collect(), spec)
    }

    pub fn from_vectors(xs: &'a [Vec<Complex64>], spec: LatticeSpec) -> Result<Self> {
        Self::new(xs.iter().map(|x| x.as_slice()).collect(), spec)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Per-trial `mean_rows ‖Σ_j c_j(t) x_j(row)‖^p` (max over rows when `p = ∞`).
    fn trial_moments(&self, p: f64, trials: usize, coeff: impl Fn(usize, usize) -> Complex64 + Sync) -> Vec<f64> {
        let d = self.spec.d;
        let rows = self.len / d;
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut acc = vec![Complex64::new(0.0, 0.0); self.len];
                for (j, x) in self.xs.iter().enumerate() {
                    let c = coeff(t, j);
                    if c.re == 0.0 && c.im == 0.0 {
                        continue;
                    }
                    for (a, v) in acc.iter_mut().zip(x.iter()) {
                        *a += c * v;
                    }
                }
                let norms = acc.chunks_exact(d).map(|r| lr_norm(r.iter().map(|c| c.norm()), self.spec.r));
                if p.is_infinite() {
                    norms.fold(0.0, f64::max)
                } else {
                    norms.map(|v| v.powf(p)).sum::<f64>() / rows as f64
                }
            })
            .collect()
    }
}

fn aggregate(moments: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        moments.iter().copied().fold(0.0, f64::max)
    } else {
        (moments.iter().sum::<f64>() / moments.len() as f64).powf(1.0 / p)
    }
}

fn resample_indices(seed: u64, round: usize, t: usize) -> impl Iterator<Item = usize> {
    let s = StreamRng::new(seed).stream(BOOTSTRAP_STREAM).stream(round as u64);
    (0..t).map(move |i| (s.at(i as u64) % t as u64) as usize)
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Bootstrap standard error of `f(resampled moments)`, paired across inputs.
fn bootstrap(seed: u64, series: &[&[f64]], f: impl Fn(&[Vec<f64>]) -> f64) -> f64 {
    let t = series[0].len();
    let stats: Vec<f64> = (0..BOOTSTRAP_ROUNDS)
        .map(|b| {
            let idx: Vec<usize> = resample_indices(seed, b, t).collect();
            let res: Vec<Vec<f64>> = series.iter().map(|s| idx.iter().map(|&i| s[i]).collect()).collect();
            f(&res)
        })
        .collect();
    std_dev(&stats)
}

fn estimate(moments: &[f64], p: f64, ens: &SignEnsemble) -> RadEstimate {
    let value = aggregate(moments, p);
    let stderr = if ens.exhaustive {
        0.0
    } else {
        bootstrap(ens.seed, &[moments], |r| aggregate(&r[0], p))
    };
    RadEstimate {
        value,
        stderr,
        p,
        trials: ens.trials,
        seed: ens.seed,
        exhaustive: ens.exhaustive,
        generator: ens.generator_id().to_string(),
    }
}

fn check_p(p: f64) -> Result<()> {
    precondition!(p >= 1.0, "exponent p = {p} must lie in [1, ∞]");
    Ok(())
}

/// `‖Σ_j ε_j x_j‖_{L^p(Rad X)}` over an ensemble of width `terms.len()`.
pub fn rad_norm(terms: &Terms, p: f64, ens: &SignEnsemble) -> Result<RadEstimate> {
    check_p(p)?;
    precondition!(ens.n == terms.len(), "ensemble has {} signs for {} terms", ens.n, terms.len());
    let m = terms.trial_moments(p, ens.trials, |t, j| Complex64::new(ens.row(t)[j] as f64, 0.0));
    Ok(estimate(&m, p, ens))
}

/// `rad_norm` of lattice signals in `L^p(grid; X)`.
pub fn rad_norm_signals(gs: &[LatticeSignal], p: f64, src: &SignSource) -> Result<RadEstimate> {
    let terms = Terms::from_signals(gs)?;
    rad_norm(&terms, p, &src.ensemble(terms.len())?)
}

/// `rad_norm` of vectors of `ℓ^r_d`.
pub fn rad_norm_vectors(xs: &[Vec<Complex64>], spec: LatticeSpec, p: f64, src: &SignSource) -> Result<RadEstimate> {
    let terms = Terms::from_vectors(xs, spec)?;
    rad_norm(&terms, p, &src.ensemble(terms.len())?)
}

/// A ragged array of terms `x_{jk}` indexed by row `j` and column `k`.
pub struct DoubleTerms<'a> {
    terms: Terms<'a>,
    index: Vec<(usize, usize)>,
    rows: usize,
    cols: usize,
}

impl<'a> DoubleTerms<'a> {
    /// `None` entries are zero terms and are skipped.
    pub fn new(array: &[Vec<Option<&'a [Complex64]>>], spec: LatticeSpec) -> Result<Self> {
        let mut xs = Vec::new();
        let mut index = Vec::new();
        for (j, row) in array.iter().enumerate() {
            for (k, x) in row.iter().enumerate() {
                if let Some(x) = x {
                    xs.push(*x);
                    index.push((j, k));
                }
            }
        }
        let cols = array.iter().map(|r| r.len()).max().unwrap_or(0);
        Ok(Self {
            terms: Terms::new(xs, spec)?,
            index,
            rows: array.len(),
            cols,
        })
    }

    pub fn from_signals(array: &'a [Vec<LatticeSignal>]) -> Result<Self> {
        let spec = array.iter().flatten().next().map_or(LatticeSpec::scalar(), |g| g.spec());
        let first = array.iter().flatten().next();
        for g in array.iter().flatten() {
            precondition!(g.same_grid(first.unwrap()), "signals on different grids or specs");
        }
        let refs: Vec<Vec<Option<&[Complex64]>>> = array.iter().map(|r| r.iter().map(|g| Some(g.values())).collect()).collect();
        Self::new(&refs, spec)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

/// `‖Σ_{j,k} ε_j ε'_k x_{jk}‖_{L^p(Rad₂ X)}` using `rows + cols` signs.
pub fn rad2_norm(terms: &DoubleTerms, p: f64, src: &SignSource) -> Result<RadEstimate> {
    check_p(p)?;
    let ens = src.ensemble(terms.rows + terms.cols)?;
    let rows = terms.rows;
    let m = terms.terms.trial_moments(p, ens.trials, |t, i| {
        let (j, k) = terms.index[i];
        let s = ens.row(t);
        Complex64::new((s[j] * s[rows + k]) as f64, 0.0)
    });
    Ok(estimate(&m, p, &ens))
}

/// `‖Σ_{j,k} ε_{jk} x_{jk}‖` with independent signs per entry.
pub fn rad_independent_norm(terms: &DoubleTerms, p: f64, src: &SignSource) -> Result<RadEstimate> {
    check_p(p)?;
    let ens = src.ensemble(terms.terms.len())?;
    rad_norm(&terms.terms, p, &ens)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub ratio: f64,
    /// Paired bootstrap error of the ratio; zero under enumeration.
    pub stderr: f64,
    pub numerator: RadEstimate,
    pub denominator: RadEstimate,
    pub real_alpha: bool,
    /// `1 + 3·stderr` for real multipliers; complex ones are report-only.
    pub bound: Option<f64>,
    pub within_bound: Option<bool>,
}

/// `‖Σ ε_j α_j x_j‖ / ‖Σ ε_j x_j‖` with both sides on the same signs.
pub fn contraction_check(terms: &Terms, alpha: &[Complex64], p: f64, src: &SignSource) -> Result<ContractionReport> {
    check_p(p)?;
    precondition!(alpha.len() == terms.len(), "{} multipliers for {} terms", alpha.len(), terms.len());
    for (j, a) in alpha.iter().enumerate() {
        precondition!(a.norm() <= 1.0 + 1e-12, "|α_{j}| = {} exceeds 1", a.norm());
    }
    let ens = src.ensemble(terms.len())?;
    let sign = |t: usize, j: usize| ens.row(t)[j] as f64;
    let num = terms.trial_moments(p, ens.trials, |t, j| alpha[j] * sign(t, j));
    let den = terms.trial_moments(p, ens.trials, |t, j| Complex64::new(sign(t, j), 0.0));
    let ratio_of = |n: &[f64], d: &[f64]| {
        let dv = aggregate(d, p);
        if dv == 0.0 {
            0.0
        } else {
            aggregate(n, p) / dv
        }
    };
    let ratio = ratio_of(&num, &den);
    let stderr = if ens.exhaustive {
        0.0
    } else {
        bootstrap(ens.seed, &[&num, &den], |r| ratio_of(&r[0], &r[1]))
    };
    let real_alpha = alpha.iter().all(|a| a.im == 0.0);
    let bound = real_alpha.then(|| 1.0 + 3.0 * stderr);
    Ok(ContractionReport {
        ratio,
        stderr,
        numerator: estimate(&num, p, &ens),
        denominator: estimate(&den, p, &ens),
        real_alpha,
        bound,
        within_bound: bound.map(|b| ratio <= b + 1e-12),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KhintchineReport {
    /// `Rad` norm over the flattened array against the square-sum norm.
    pub rad_vs_square: f64,
    /// Double-indexed `Rad₂` against independent-sign `Rad` on the array.
    pub alpha_property: f64,
    pub rad: RadEstimate,
    pub square: f64,
    pub rad2: RadEstimate,
    pub rad_independent: RadEstimate,
}

fn safe_ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Khintchine-type and α-property comparisons on a `J × K` array of signals.
pub fn khintchine_alpha_report(array: &[Vec<LatticeSignal>], p: f64, src: &SignSource) -> Result<KhintchineReport> {
    let flat: Vec<LatticeSignal> = array.iter().flatten().cloned().collect();
    precondition!(!flat.is_empty(), "empty coefficient array");
    let rad = rad_norm_signals(&flat, p, src)?;
    let square = mixed_norm(&square_sum(&flat)?, p);
    let double = DoubleTerms::from_signals(array)?;
    let rad2 = rad2_norm(&double, p, src)?;
    let rad_independent = rad_independent_norm(&double, p, src)?;
    Ok(KhintchineReport {
        rad_vs_square: safe_ratio(rad.value, square),
        alpha_property: safe_ratio(rad2.value, rad_independent.value),
        rad,
        square,
        rad2,
        rad_independent,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RieszReport {
    pub c_row: f64,
    pub lhs: f64,
    pub rhs: RadEstimate,
    pub ratio: f64,
}

/// Row-matrix constant `c_row`, `‖Σ_j h_j a_j‖_{L²(Σ; Y)}` under counting
/// measure, and the Rademacher average of the `a_j` in `Y = ℓ^r_d`, `r ≤ 2`.
pub fn riesz_transfer_check(h: &[Vec<Complex64>], a: &[Vec<Complex64>], spec: LatticeSpec, src: &SignSource) -> Result<RieszReport> {
    precondition!(spec.r <= 2.0, "ℓ^{} does not have cotype 2", spec.r);
    precondition!(!h.is_empty() && h.len() == a.len(), "{} rows for {} vectors", h.len(), a.len());
    let s = h[0].len();
    precondition!(s > 0 && h.iter().all(|r| r.len() == s), "ragged row matrix");
    precondition!(a.iter().all(|v| v.len() == spec.d), "vectors must have {} entries", spec.d);

    let m = DMatrix::from_fn(h.len(), s, |j, i| h[j][i]);
    let c_row = m.singular_values().iter().copied().fold(0.0, f64::max);

    let mut lhs_sq = 0.0;
    for i in 0..s {
        let mut v = vec![Complex64::new(0.0, 0.0); spec.d];
        for (hj, aj) in h.iter().zip(a) {
            for (x, y) in v.iter_mut().zip(aj) {
                *x += hj[i] * y;
            }
        }
        lhs_sq += spec.norm(&v).powi(2);
    }
    let lhs = lhs_sq.sqrt();
    let rhs = rad_norm_vectors(a, spec, 2.0, src)?;
    let ratio = safe_ratio(lhs, c_row * rhs.value);
    Ok(RieszReport { c_row, lhs, rhs, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::int;
    use proptest::prelude::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn scalar(xs: &[f64]) -> Vec<Vec<Complex64>> {
        xs.iter().map(|&x| vec![c(x)]).collect()
    }

    const SRC: SignSource = SignSource { seed: 11, trials: 256 };

    /// Independent oracle: explicit enumeration of all sign patterns.
    fn oracle(xs: &[Vec<Complex64>], r: f64, p: f64) -> f64 {
        let n = xs.len();
        let mut acc = 0.0;
        for mask in 0..(1u32 << n) {
            let mut v = vec![c(0.0); xs[0].len()];
            for (j, x) in xs.iter().enumerate() {
                let s = if mask >> j & 1 == 1 { -1.0 } else { 1.0 };
                for (a, b) in v.iter_mut().zip(x) {
                    *a += b * s;
                }
            }
            let norm = if r.is_infinite() {
                v.iter().map(|z| z.norm()).fold(0.0, f64::max)
            } else {
                v.iter().map(|z| z.norm().powf(r)).sum::<f64>().powf(1.0 / r)
            };
            acc += norm.powf(p);
        }
        (acc / (1u64 << n) as f64).powf(1.0 / p)
    }

    #[test]
    fn rad_norm_examples() {
        let spec = LatticeSpec::new(2, 2.0).unwrap();
        let e = vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]];
        let est = rad_norm_vectors(&e, spec, 2.0, &SRC).unwrap();
        assert!(est.exhaustive && est.stderr == 0.0);
        assert!((est.value - 2f64.sqrt()).abs() < 1e-15);

        let x = vec![vec![c(3.0), c(-4.0)]];
        for p in [1.0, 2.0, 5.0, f64::INFINITY] {
            assert!((rad_norm_vectors(&x, spec, p, &SRC).unwrap().value - 5.0).abs() < 1e-14);
        }

        let v = rad_norm_vectors(&scalar(&[1.0, 1.0]), LatticeSpec::scalar(), 4.0, &SRC).unwrap();
        assert!((v.value - 8f64.powf(0.25)).abs() < 1e-14);
    }

    #[test]
    fn small_trial_counts_are_rejected() {
        let xs = scalar(&[1.0; 13]);
        let err = rad_norm_vectors(&xs, LatticeSpec::scalar(), 2.0, &SignSource::new(1, 63));
        assert!(matches!(err, Err(crate::Error::Precondition(_))));
        let ok = rad_norm_vectors(&xs, LatticeSpec::scalar(), 2.0, &SignSource::new(1, 64)).unwrap();
        assert!(!ok.exhaustive && ok.stderr > 0.0 && ok.trials == 64);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_close() {
        let xs = scalar(&(1..=16).map(|j| 1.0 / j as f64).collect::<Vec<_>>());
        let src = SignSource::new(99, 4096);
        let a = rad_norm_vectors(&xs, LatticeSpec::scalar(), 2.0, &src).unwrap();
        let b = rad_norm_vectors(&xs, LatticeSpec::scalar(), 2.0, &src).unwrap();
        assert_eq!(a, b);
        let exact = xs.iter().map(|x| x[0].re.powi(2)).sum::<f64>().sqrt();
        assert!((a.value - exact).abs() < 4.0 * a.stderr + 1e-3, "{} vs {exact} ± {}", a.value, a.stderr);
    }

    #[test]
    fn contraction_examples() {
        let x = scalar(&[1.0, 1.0]);
        let terms = Terms::from_vectors(&x, LatticeSpec::scalar()).unwrap();
        let one = contraction_check(&terms, &[c(1.0), c(1.0)], 2.0, &SRC).unwrap();
        assert_eq!(one.ratio, 1.0);
        let zero = contraction_check(&terms, &[c(0.0), c(0.0)], 2.0, &SRC).unwrap();
        assert_eq!(zero.ratio, 0.0);
        let half = contraction_check(&terms, &[c(0.5), c(0.5)], 2.0, &SRC).unwrap();
        assert!((half.ratio - 0.5).abs() < 1e-15);
        assert_eq!(half.within_bound, Some(true));
        let cplx = contraction_check(&terms, &[Complex64::new(0.0, 1.0), c(1.0)], 2.0, &SRC).unwrap();
        assert!(cplx.bound.is_none() && !cplx.real_alpha);
        assert!(contraction_check(&terms, &[c(1.5), c(0.0)], 2.0, &SRC).is_err());
    }

    #[test]
    fn khintchine_examples() {
        let one = |v: f64| LatticeSignal::constant(LatticeSpec::scalar(), int(1), 8, &[c(v)]).unwrap();
        let rep = khintchine_alpha_report(&[vec![one(1.0), one(1.0)]], 4.0, &SRC).unwrap();
        assert!((rep.rad_vs_square - 2f64.powf(0.25)).abs() < 1e-14);

        let tone = |k: i64, a: f64| {
            let g = crate::spectral::GridSignal::tone(8, int(1), k).unwrap();
            LatticeSignal::from_scalar(&g).map_values(|z| z * a)
        };
        let array = vec![vec![tone(0, 1.0), tone(1, -2.0), tone(3, 0.5)], vec![tone(2, 0.25), tone(-1, 3.0), tone(1, 1.0)]];
        let rep = khintchine_alpha_report(&array, 2.0, &SRC).unwrap();
        assert!((rep.rad_vs_square - 1.0).abs() < 1e-12);
        assert!((rep.alpha_property - 1.0).abs() < 1e-12);
    }

    #[test]
    fn riesz_examples() {
        let spec = LatticeSpec::new(2, 1.0).unwrap();
        let id = vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]];
        let a = vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]];
        let rep = riesz_transfer_check(&id, &a, spec, &SRC).unwrap();
        assert!((rep.c_row - 1.0).abs() < 1e-14);
        assert!((rep.lhs - 2f64.sqrt()).abs() < 1e-14);
        assert!((rep.rhs.value - 2.0).abs() < 1e-14);
        assert!((rep.ratio - 2f64.sqrt() / 2.0).abs() < 1e-14);

        let h = vec![vec![c(0.6), c(0.8)]];
        let a1 = vec![vec![c(2.0), c(-1.0)]];
        let rep = riesz_transfer_check(&h, &a1, spec, &SRC).unwrap();
        assert!((rep.lhs - 3.0).abs() < 1e-14 && (rep.rhs.value - 3.0).abs() < 1e-14);
        assert!((rep.ratio - 1.0).abs() < 1e-14);

        let zero = vec![vec![c(0.0), c(0.0)]; 2];
        assert_eq!(riesz_transfer_check(&id, &zero, spec, &SRC).unwrap().ratio, 0.0);
        assert!(riesz_transfer_check(&id, &a, LatticeSpec::new(2, 3.0).unwrap(), &SRC).is_err());
    }

    fn vecs(n: std::ops::Range<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<Complex64>>> {
        prop::collection::vec(
            prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0).prop_map(|(a, b)| Complex64::new(a, b)), d),
            n,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn enumeration_matches_oracle(
            xs in vecs(1..7, 3),
            r in prop_oneof![1.0f64..6.0, Just(f64::INFINITY)],
            p in 1.0f64..6.0,
        ) {
            let spec = LatticeSpec::new(3, r).unwrap();
            let est = rad_norm_vectors(&xs, spec, p, &SRC).unwrap();
            let o = oracle(&xs, r, p);
            prop_assert!((est.value - o).abs() <= 1e-12 * o.max(1.0));
        }

        #[test]
        fn p2_closed_form(xs in vecs(1..13, 3)) {
            let est = rad_norm_vectors(&xs, LatticeSpec::new(3, 2.0).unwrap(), 2.0, &SRC).unwrap();
            let closed: f64 = xs.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((est.value - closed).abs() <= 1e-12 * closed.max(1.0));
        }

        #[test]
        fn real_contraction(
            xs in vecs(1..10, 2),
            alpha in prop::collection::vec(-1.0f64..=1.0, 10),
            r in 1.0f64..5.0, p in 1.0f64..5.0,
        ) {
            let spec = LatticeSpec::new(2, r).unwrap();
            let terms = Terms::from_vectors(&xs, spec).unwrap();
            let a: Vec<Complex64> = alpha[..xs.len()].iter().map(|&x| c(x)).collect();
            let rep = contraction_check(&terms, &a, p, &SRC).unwrap();
            prop_assert!(rep.ratio <= 1.0 + 1e-12, "ratio {}", rep.ratio);
        }

        #[test]
        fn permutation_and_sign_invariance(
            xs in vecs(2..9, 2),
            flips in prop::collection::vec(any::<bool>(), 8),
            rot in 0usize..8, p in 1.0f64..5.0,
        ) {
            let spec = LatticeSpec::new(2, 3.0).unwrap();
            let base = rad_norm_vectors(&xs, spec, p, &SRC).unwrap().value;
            let mut ys: Vec<Vec<Complex64>> = xs.iter().zip(&flips)
                .map(|(x, &f)| x.iter().map(|z| if f { -z } else { *z }).collect())
                .collect();
            let len = ys.len();
            ys.rotate_left(rot % len);
            let moved = rad_norm_vectors(&ys, spec, p, &SRC).unwrap().value;
            prop_assert!((base - moved).abs() <= 1e-12 * base.max(1.0));
        }
    }
}
