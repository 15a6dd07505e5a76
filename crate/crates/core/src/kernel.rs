//! The kernels `K_{j,k}(x, y) = 2^k ψ(2^k(x - y)) e^{-2πi c_{j,k} y}` built
//! on the left dyadic pieces of a family, shell integrals of kernel
//! differences and their decay in `m`, the small-gap exponential-sum
//! inequality, and the two halves of the `L^∞ → BMO` oscillation estimate.

use std::f64::consts::PI;
use std::sync::Arc;

use num::Signed;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::interval::{dyadic_decompose, int, pow2, to_f64, DisjointFamily, DyadicDecomposition, Interval, Rational, Side};
use crate::lattice::{LatticeSignal, LatticeSpec};
use crate::quad::GaussLegendre;
use crate::rademacher::{rad2_norm, rad_norm_vectors, DoubleTerms, SignSource};
use crate::rng::StreamRng;
use crate::spectral::AdaptedBump;

/// Quadrature points per unit length at the finest active scale.
pub const POINTS_PER_UNIT: f64 = 64.0;
pub const REFINE_TOL: f64 = 1e-8;
const MAX_DOUBLINGS: usize = 8;
const RULE_NODES: usize = 12;
/// Monte Carlo width for `Rad₂` norms beyond the enumeration limit.
pub const BMO_TRIALS: usize = 512;

/// Kernel data on the `a`-side pieces: `centres[j][k-1] = c_{j,k}` for
/// nonempty pieces.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    pub decomposition: DyadicDecomposition,
    pub centres: Vec<Vec<Option<Rational>>>,
    bump: Arc<AdaptedBump>,
    centres_f64: Vec<Vec<Option<f64>>>,
}

impl KernelSpec {
    /// Requires every interval of length at least 4.
    pub fn new(fam: &DisjointFamily, bump: Arc<AdaptedBump>) -> Result<Self> {
        let decomposition = dyadic_decompose(fam)?;
        let centres: Vec<Vec<Option<Rational>>> = decomposition
            .entries
            .iter()
            .map(|e| {
                (1..=e.n)
                    .map(|k| e.piece(Side::A, k).map(|_| centre_formula(e.source.left(), k)))
                    .collect()
            })
            .collect();
        let centres_f64 = centres
            .iter()
            .map(|row| row.iter().map(|c| c.as_ref().map(to_f64)).collect())
            .collect();
        Ok(Self {
            decomposition,
            centres,
            bump,
            centres_f64,
        })
    }

    pub fn bump(&self) -> &AdaptedBump {
        &self.bump
    }

    pub fn sources(&self) -> usize {
        self.centres.len()
    }

    pub fn max_scale(&self) -> u32 {
        self.centres.iter().map(|r| r.len() as u32).max().unwrap_or(0)
    }

    pub fn centre(&self, j: usize, k: u32) -> Option<&Rational> {
        self.centres.get(j)?.get(k.checked_sub(1)? as usize)?.as_ref()
    }

    /// Present `(j, k, c_{j,k})`.
    fn present(&self) -> impl Iterator<Item = (usize, u32, f64)> + '_ {
        self.centres_f64
            .iter()
            .enumerate()
            .flat_map(|(j, row)| row.iter().enumerate().filter_map(move |(i, c)| c.map(|c| (j, i as u32 + 1, c))))
    }

    fn active_scales(&self) -> Vec<u32> {
        let mut ks: Vec<u32> = self.present().map(|(_, k, _)| k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    /// Pairs `(k, j, j')` with `|c_{j,k} - c_{j',k}| < 2^k`.
    pub fn gap_violations(&self) -> Vec<(u32, usize, usize)> {
        let mut out = Vec::new();
        for k in 1..=self.max_scale() {
            let row: Vec<(usize, &Rational)> = (0..self.sources()).filter_map(|j| self.centre(j, k).map(|c| (j, c))).collect();
            for (i, (j, cj)) in row.iter().enumerate() {
                for (jp, cjp) in &row[i + 1..] {
                    let gap = (*cj - *cjp).abs();
                    if gap < pow2(k) {
                        out.push((k, *j, *jp));
                    }
                }
            }
        }
        out
    }

    /// `c_{j,k} - c_{j',k}` for all present pairs equals `a_j - a_{j'}`.
    pub fn splitting_holds(&self) -> bool {
        let lefts: Vec<&Rational> = self.decomposition.entries.iter().map(|e| e.source.left()).collect();
        (1..=self.max_scale()).all(|k| {
            (0..self.sources()).all(|j| {
                (0..self.sources()).all(|jp| match (self.centre(j, k), self.centre(jp, k)) {
                    (Some(a), Some(b)) => a - b == lefts[j] - lefts[jp],
                    _ => true,
                })
            })
        })
    }
}

fn centre_formula(a: &Rational, k: u32) -> Rational {
    a - int(2) + pow2(k) + pow2(k - 1)
}

/// `K_{j,k}(x, y)`; an empty piece is a domain error.
pub fn kernel_value(spec: &KernelSpec, j: usize, k: u32, x: f64, y: f64) -> Result<Complex64> {
    let c = spec
        .centres_f64
        .get(j)
        .and_then(|r| r.get((k as usize).wrapping_sub(1)))
        .copied()
        .flatten()
        .ok_or_else(|| Error::Domain(format!("piece ({j}, {k}) is empty or absent")))?;
    Ok(kernel_raw(&spec.bump, k, c, x, y))
}

#[inline]
fn kernel_raw(bump: &AdaptedBump, k: u32, c: f64, x: f64, y: f64) -> Complex64 {
    let s = (1u64 << k) as f64;
    let amp = s * bump.spatial(s * (x - y));
    if amp == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::from_polar(amp, -2.0 * PI * c * y)
}

/// `I_m(x, z) = {y : 2^m|x - z| < |y - z| ≤ 2^{m+1}|x - z|}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub x: f64,
    pub z: f64,
    pub m: u32,
    /// `[z - 2^{m+1}δ, z - 2^m δ)`.
    pub left: (f64, f64),
    /// `(z + 2^m δ, z + 2^{m+1}δ]`.
    pub right: (f64, f64),
    pub k0: u32,
    pub k1: u32,
}

impl ShellSpec {
    pub fn measure(&self) -> f64 {
        (self.left.1 - self.left.0) + (self.right.1 - self.right.0)
    }

    pub fn contains(&self, y: f64) -> bool {
        (self.left.0 <= y && y < self.left.1) || (self.right.0 < y && y <= self.right.1)
    }
}

/// `min{k ≥ 1 : 2^{-k} ≤ t}`.
fn least_scale(t: f64) -> u32 {
    let mut k = 1;
    while 2f64.powi(-(k as i32)) > t && k < 1100 {
        k += 1;
    }
    k
}

pub fn shell(x: f64, z: f64, m: u32) -> Result<ShellSpec> {
    if x == z {
        return Err(Error::Domain("shell needs x ≠ z".into()));
    }
    if !(x.is_finite() && z.is_finite()) {
        return Err(Error::Domain("shell endpoints must be finite".into()));
    }
    precondition!(m >= 1, "shell index m must be at least 1");
    let d = (x - z).abs();
    let inner = 2f64.powi(m as i32) * d;
    let outer = 2.0 * inner;
    Ok(ShellSpec {
        x,
        z,
        m,
        left: (z - outer, z - inner),
        right: (z + inner, z + outer),
        k0: least_scale(inner),
        k1: least_scale(2f64.powf(2.0 * m as f64 / 3.0) * d),
    })
}

/// `λ[j][k-1]` in `ℓ^{r'}_d`; entries at empty pieces are ignored.
pub type LambdaArray = Vec<Vec<Vec<Complex64>>>;

pub fn zero_lambda(spec: &KernelSpec, d: usize) -> LambdaArray {
    spec.centres.iter().map(|r| vec![vec![Complex64::new(0.0, 0.0); d]; r.len()]).collect()
}

/// Complex Gaussian entries at every present piece, from `StreamRng(seed)`.
pub fn random_lambda(spec: &KernelSpec, d: usize, seed: u64) -> LambdaArray {
    let mut rng = StreamRng::new(seed);
    spec.centres
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| {
                    (0..d)
                        .map(|_| {
                            let re: f64 = StandardNormal.sample(&mut rng);
                            let im: f64 = StandardNormal.sample(&mut rng);
                            if c.is_some() {
                                Complex64::new(re, im)
                            } else {
                                Complex64::new(0.0, 0.0)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn check_lambda(spec: &KernelSpec, lam: &LambdaArray, d: usize) -> Result<()> {
    precondition!(lam.len() == spec.sources(), "λ has {} rows for {} sources", lam.len(), spec.sources());
    for (row, c) in lam.iter().zip(&spec.centres) {
        precondition!(row.len() == c.len(), "λ row has {} scales, expected {}", row.len(), c.len());
        precondition!(row.iter().all(|v| v.len() == d), "λ entries must have {d} coordinates");
    }
    Ok(())
}

fn double_terms<'a>(spec: &KernelSpec, vals: &'a [Vec<Vec<Complex64>>], dual: LatticeSpec) -> Result<DoubleTerms<'a>> {
    let refs: Vec<Vec<Option<&[Complex64]>>> = vals
        .iter()
        .zip(&spec.centres)
        .map(|(row, cs)| row.iter().zip(cs).map(|(v, c)| c.as_ref().map(|_| v.as_slice())).collect())
        .collect();
    DoubleTerms::new(&refs, dual)
}

/// Composite Gauss-Legendre over `segments`, doubling the panel count until
/// successive values agree to `REFINE_TOL` relative.
fn integrate_refined<F>(segments: &[(f64, f64)], density: f64, f: F) -> Result<(f64, usize)>
where
    F: Fn(f64) -> f64 + Sync,
{
    let rule = GaussLegendre::new(RULE_NODES);
    let eval = |scale: usize| -> f64 {
        let mut total = 0.0;
        for &(a, b) in segments {
            if b <= a {
                continue;
            }
            let panels = (((b - a) * density / RULE_NODES as f64).ceil() as usize).max(1) * scale;
            let h = (b - a) / panels as f64;
            let sums: Vec<f64> = (0..panels)
                .into_par_iter()
                .map(|i| {
                    let lo = a + h * i as f64;
                    let hi = if i + 1 == panels { b } else { lo + h };
                    rule.integrate(lo, hi, &f)
                })
                .collect();
            total += sums.iter().sum::<f64>();
        }
        total
    };
    let mut prev = eval(1);
    let mut scale = 1;
    for _ in 0..MAX_DOUBLINGS {
        scale *= 2;
        let next = eval(scale);
        let tol = REFINE_TOL * next.abs().max(prev.abs());
        if (next - prev).abs() <= tol || next.abs().max(prev.abs()) < 1e-300 {
            return Ok((next, scale));
        }
        prev = next;
    }
    Err(Error::Numerical(format!("shell quadrature did not settle to {REFINE_TOL}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelIntegral {
    pub value: f64,
    /// `Rad₂` norm of `λ` before normalization; `λ` is divided by it.
    pub lambda_norm: f64,
    /// `μ_k = ‖Σ_j ε_j λ_{j,k}‖_{Rad(X*)}` of the normalized `λ`.
    pub mu: Vec<f64>,
    pub sum_mu_sq: f64,
    pub points_per_unit: f64,
    pub x_max: f64,
    pub shell: ShellSpec,
}

/// Integrand `‖Σ_{j,k}[K_{j,k}(x,y) - K_{j,k}(z,y)] λ_{j,k}‖²_{X*}`.
fn difference_integrand(spec: &KernelSpec, x: f64, z: f64, lam: &LambdaArray, dual: LatticeSpec, y: f64) -> f64 {
    let d = dual.d;
    let mut v = vec![Complex64::new(0.0, 0.0); d];
    for (j, k, c) in spec.present() {
        let s = (1u64 << k) as f64;
        let diff = s * (spec.bump.spatial(s * (x - y)) - spec.bump.spatial(s * (z - y)));
        if diff == 0.0 {
            continue;
        }
        let w = Complex64::from_polar(diff, -2.0 * PI * c * y);
        for (acc, l) in v.iter_mut().zip(&lam[j][k as usize - 1]) {
            *acc += w * l;
        }
    }
    dual.norm(&v).powi(2)
}

/// Shell segments clipped to where some kernel is nonzero.
fn clipped_segments(spec: &KernelSpec, sh: &ShellSpec, x: f64, z: f64) -> Vec<(f64, f64)> {
    let kmin = spec.active_scales().first().copied().unwrap_or(1);
    let reach = spec.bump.x_max() / (1u64 << kmin) as f64;
    let (lo, hi) = (x.min(z) - reach, x.max(z) + reach);
    [sh.left, sh.right]
        .into_iter()
        .map(|(a, b)| (a.max(lo), b.min(hi)))
        .filter(|(a, b)| b > a)
        .collect()
}

fn density(spec: &KernelSpec) -> f64 {
    POINTS_PER_UNIT * (1u64 << spec.max_scale()) as f64
}

/// Shell integral of the kernel difference for `λ` in `X* = ℓ^{r'}_d`,
/// `X = lattice` with `r ≥ 2`, over an explicit shell.
pub fn kernel_difference_on_shell(
    spec: &KernelSpec,
    lattice: LatticeSpec,
    x: f64,
    z: f64,
    sh: &ShellSpec,
    lam: &LambdaArray,
    src: &SignSource,
) -> Result<KernelIntegral> {
    precondition!(lattice.is_two_convex(), "X = ℓ^{} needs r ≥ 2 so that X* has cotype 2", lattice.r);
    let dual = lattice.dual();
    check_lambda(spec, lam, dual.d)?;
    let lambda_norm = rad2_norm(&double_terms(spec, lam, dual)?, 2.0, src)?.value;
    let scale = if lambda_norm > 0.0 { 1.0 / lambda_norm } else { 0.0 };
    let lam: LambdaArray = lam.iter().map(|r| r.iter().map(|v| v.iter().map(|c| c * scale).collect()).collect()).collect();

    let mut mu = Vec::with_capacity(spec.max_scale() as usize);
    for k in 1..=spec.max_scale() {
        let col: Vec<Vec<Complex64>> = (0..spec.sources())
            .filter(|&j| spec.centre(j, k).is_some())
            .map(|j| lam[j][k as usize - 1].clone())
            .collect();
        mu.push(if col.is_empty() { 0.0 } else { rad_norm_vectors(&col, dual, 2.0, src)?.value });
    }
    let sum_mu_sq = mu.iter().map(|m| m * m).sum();

    let value = if x == z || scale == 0.0 {
        0.0
    } else {
        let segs = clipped_segments(spec, sh, x, z);
        integrate_refined(&segs, density(spec), |y| difference_integrand(spec, x, z, &lam, dual, y))?.0
    };
    Ok(KernelIntegral {
        value,
        lambda_norm,
        mu,
        sum_mu_sq,
        points_per_unit: density(spec),
        x_max: spec.bump.x_max(),
        shell: sh.clone(),
    })
}

/// `∫_{I_m(x,z)} ‖Σ_{j,k}[K_{j,k}(x,y) - K_{j,k}(z,y)] λ_{j,k}‖²_{X*} dy`
/// with `λ` normalized to unit `Rad₂` norm; zero when `x = z`.
pub fn kernel_difference_integral(
    spec: &KernelSpec,
    lattice: LatticeSpec,
    x: f64,
    z: f64,
    m: u32,
    lam: &LambdaArray,
    src: &SignSource,
) -> Result<KernelIntegral> {
    let sh = if x == z {
        ShellSpec {
            x,
            z,
            m,
            left: (z, z),
            right: (z, z),
            k0: 0,
            k1: 0,
        }
    } else {
        shell(x, z, m)?
    };
    kernel_difference_on_shell(spec, lattice, x, z, &sh, lam, src)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaTerm {
    pub k: u32,
    /// `1`: `k ≤ k0`, `2`: `k0 < k < k1`, `3`: `k ≥ k1`.
    pub regime: u8,
    pub alpha: f64,
    /// Closed-form bound of the regime without its constant.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaOverlay {
    pub k0: u32,
    pub k1: u32,
    pub terms: Vec<AlphaTerm>,
    /// `max_k α_k / bound_k`.
    pub fitted_c: f64,
}

/// `α_k = 2^{2k} sup_y |ψ(2^k(x-y)) - ψ(2^k(z-y))|² ∫ ‖q_k‖²` per scale,
/// against the three regime bounds.
pub fn alpha_overlay(
    spec: &KernelSpec,
    lattice: LatticeSpec,
    x: f64,
    z: f64,
    m: u32,
    lam: &LambdaArray,
    src: &SignSource,
) -> Result<AlphaOverlay> {
    let sh = shell(x, z, m)?;
    let base = kernel_difference_on_shell(spec, lattice, x, z, &sh, lam, src)?;
    let dual = lattice.dual();
    let scale = if base.lambda_norm > 0.0 { 1.0 / base.lambda_norm } else { 0.0 };
    let dist = (x - z).abs();
    let segs: Vec<(f64, f64)> = vec![sh.left, sh.right];
    let sample_step = 1.0 / density(spec);
    let mut terms = Vec::new();
    for k in spec.active_scales() {
        let mu = base.mu[k as usize - 1];
        if mu == 0.0 {
            continue;
        }
        let s = (1u64 << k) as f64;
        let mut sup: f64 = 0.0;
        for &(a, b) in &segs {
            let steps = ((b - a) / sample_step).ceil() as usize;
            for i in 0..=steps {
                let y = a + (b - a) * i as f64 / steps as f64;
                let diff = spec.bump.spatial(s * (x - y)) - spec.bump.spatial(s * (z - y));
                sup = sup.max(diff * diff);
            }
        }
        let rows: Vec<(f64, &Vec<Complex64>)> = (0..spec.sources())
            .filter_map(|j| spec.centres_f64[j].get(k as usize - 1).copied().flatten().map(|c| (c, &lam[j][k as usize - 1])))
            .collect();
        let q_sq = |y: f64| {
            let mut v = vec![Complex64::new(0.0, 0.0); dual.d];
            for (c, l) in &rows {
                let w = Complex64::from_polar(scale / mu, -2.0 * PI * c * y);
                for (acc, e) in v.iter_mut().zip(l.iter()) {
                    *acc += w * e;
                }
            }
            dual.norm(&v).powi(2)
        };
        let density = POINTS_PER_UNIT * s.max(rows.iter().map(|(c, _)| c.abs()).fold(1.0, f64::max));
        let q_int = integrate_refined(&segs, density, q_sq)?.0;
        let alpha = s * s * sup * q_int;
        let (regime, bound) = if k <= sh.k0 {
            (1, s.powi(3) * dist * dist)
        } else if k < sh.k1 {
            (2, s.powi(4) * 2f64.powi(m as i32) * dist.powi(3))
        } else {
            (3, s.powi(-2) * 2f64.powi(-3 * m as i32) * dist.powi(-3))
        };
        terms.push(AlphaTerm { k, regime, alpha, bound });
    }
    let fitted_c = terms.iter().map(|t| t.alpha / t.bound).fold(0.0, f64::max);
    Ok(AlphaOverlay {
        k0: sh.k0,
        k1: sh.k1,
        terms,
        fitted_c,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub m: u32,
    pub a_m: f64,
    pub r_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub x: f64,
    pub z: f64,
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `log₂ A_m` against `m` over positive `A_m`.
    pub slope: Option<f64>,
    pub lambda_samples: usize,
    pub seed: u64,
    pub max_sum_mu_sq: f64,
    pub x_max: f64,
}

/// `A_m = max over λ` of the normalized shell integral, for each `m`.
pub fn decay_fit_with(
    spec: &KernelSpec,
    lattice: LatticeSpec,
    x: f64,
    z: f64,
    ms: &[u32],
    lambdas: &[LambdaArray],
    src: &SignSource,
) -> Result<DecayReport> {
    for &m in ms {
        precondition!((1..=12).contains(&m), "shell index {m} outside 1..=12");
    }
    let dist = (x - z).abs();
    let mut rows = Vec::with_capacity(ms.len());
    let mut max_sum_mu_sq: f64 = 0.0;
    for &m in ms {
        let mut a_m: f64 = 0.0;
        for lam in lambdas {
            let r = kernel_difference_integral(spec, lattice, x, z, m, lam, src)?;
            a_m = a_m.max(r.value);
            max_sum_mu_sq = max_sum_mu_sq.max(r.sum_mu_sq);
        }
        rows.push(DecayRow {
            m,
            a_m,
            r_m: a_m * 2f64.powf(5.0 * m as f64 / 3.0) * dist,
        });
    }
    Ok(DecayReport {
        x,
        z,
        slope: fit_slope(&rows),
        rows,
        lambda_samples: lambdas.len(),
        seed: src.seed,
        max_sum_mu_sq,
        x_max: spec.bump.x_max(),
    })
}

/// As [`decay_fit_with`] over `samples` Gaussian `λ` drawn from `seed`.
pub fn decay_fit(
    spec: &KernelSpec,
    lattice: LatticeSpec,
    x: f64,
    z: f64,
    ms: &[u32],
    samples: usize,
    seed: u64,
) -> Result<DecayReport> {
    let d = lattice.d;
    let lambdas: Vec<LambdaArray> = (0..samples)
        .map(|s| random_lambda(spec, d, StreamRng::derive_seed(seed, s as u64)))
        .collect();
    let mut rep = decay_fit_with(spec, lattice, x, z, ms, &lambdas, &SignSource::new(seed, BMO_TRIALS))?;
    rep.seed = seed;
    Ok(rep)
}

fn fit_slope(rows: &[DecayRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.a_m > 0.0).map(|r| (r.m as f64, r.a_m.log2())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// `∫_I |Σ_j α_j e^{2πiγ_j y}|² dy / (max(|I|, 1) Σ_j |α_j|²)`.
pub fn dirichlet_gap_ratio(gamma: &[f64], alpha: &[Complex64], iv: &Interval) -> Result<f64> {
    precondition!(gamma.len() == alpha.len(), "{} frequencies for {} coefficients", gamma.len(), alpha.len());
    precondition!(gamma.iter().all(|g| g.is_finite()), "non-finite frequency");
    for w in gamma.windows(2) {
        precondition!(w[1] - w[0] >= 1.0, "frequency gap {} < 1", w[1] - w[0]);
    }
    let mass: f64 = alpha.iter().map(|a| a.norm_sqr()).sum();
    if mass == 0.0 {
        return Ok(0.0);
    }
    let (a, b) = iv.to_f64();
    let span = gamma.last().unwrap() - gamma[0];
    let f = |y: f64| {
        gamma
            .iter()
            .zip(alpha)
            .map(|(g, al)| al * Complex64::from_polar(1.0, 2.0 * PI * g * y))
            .sum::<Complex64>()
            .norm_sqr()
    };
    let rule = GaussLegendre::new(RULE_NODES);
    let mut panels = (((b - a) * (span + 1.0)).ceil() as usize).max(4);
    let mut prev = rule.composite(a, b, panels, f);
    for _ in 0..MAX_DOUBLINGS {
        panels *= 2;
        let next = rule.composite(a, b, panels, f);
        if (next - prev).abs() <= 1e-13 * next.abs().max(mass) {
            return Ok(next / ((b - a).max(1.0) * mass));
        }
        prev = next;
    }
    Err(Error::Numerical("exponential-sum quadrature did not settle".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmoReport {
    pub interval: Interval,
    /// Far part: mean over `I` of `‖∫_{(2I)^c}[K(x,y) - K(z,y)] f(y) dy‖_{Rad₂(X)}`.
    pub a: f64,
    /// Near part: mean over `I` of `‖∫_{2I} K(x,y) f(y) dy‖_{Rad₂(X)}`.
    pub b: f64,
    pub seed: u64,
    pub trials: usize,
    pub exhaustive: bool,
    pub x_nodes: usize,
}

const CELL_NODES: usize = 8;
const X_PANELS: usize = 8;

/// `f` is a step function on cells `[origin + nh, origin + (n+1)h)`, `h =
/// L/N`, and zero outside the window.
pub fn bmo_oscillation_report(
    spec: &KernelSpec,
    f: &LatticeSignal,
    origin: f64,
    iv: &Interval,
    src: &SignSource,
) -> Result<BmoReport> {
    precondition!(f.sup_norm() <= 1.0 + 1e-12, "‖f‖_∞ = {} exceeds 1", f.sup_norm());
    let lattice = f.spec();
    let d = lattice.d;
    let h = to_f64(f.period()) / f.len() as f64;
    let (ia, ib) = iv.to_f64();
    let z = to_f64(&iv.centre());
    let (da, db) = iv.doubled().to_f64();
    let present: Vec<(usize, u32, f64)> = spec.present().collect();
    let kmin = present.iter().map(|p| p.1).min().unwrap_or(1);
    let reach = spec.bump.x_max() / (1u64 << kmin) as f64;
    let cell_rule = GaussLegendre::new(CELL_NODES);
    let nonzero: Vec<usize> = (0..f.len()).filter(|&n| f.row(n).iter().any(|c| c.norm() > 0.0)).collect();

    // ∫ over the parts of each cell inside / outside 2I of g(y) f_n.
    let split_cell = |lo: f64, hi: f64| -> [(f64, f64); 3] {
        [(lo, hi.min(da)), (lo.max(da), hi.min(db)), (lo.max(db), hi)]
    };

    let x_rule = GaussLegendre::new(CELL_NODES);
    let xw: Vec<(f64, f64)> = {
        let hx = (ib - ia) / X_PANELS as f64;
        (0..X_PANELS)
            .flat_map(|p| {
                let lo = ia + hx * p as f64;
                x_rule.mapped(lo, lo + hx).collect::<Vec<_>>()
            })
            .collect()
    };
    let ens_width = spec.sources() + spec.max_scale() as usize;
    let src = if ens_width <= crate::rademacher::EXHAUSTIVE_MAX_SIGNS {
        *src
    } else {
        SignSource::new(src.seed, BMO_TRIALS)
    };

    let per_x: Vec<(f64, f64)> = xw
        .par_iter()
        .map(|&(x, _)| -> Result<(f64, f64)> {
            let mut far: Vec<Vec<Vec<Complex64>>> = spec.centres.iter().map(|r| vec![vec![Complex64::new(0.0, 0.0); d]; r.len()]).collect();
            let mut near = far.clone();
            for &n in &nonzero {
                let lo = origin + h * n as f64;
                let hi = lo + h;
                if hi < x.min(z) - reach || lo > x.max(z) + reach {
                    continue;
                }
                let fv = f.row(n);
                let parts = split_cell(lo, hi);
                for &(j, k, c) in &present {
                    let mut far_s = Complex64::new(0.0, 0.0);
                    let mut near_s = Complex64::new(0.0, 0.0);
                    for (pi, &(a, b)) in parts.iter().enumerate() {
                        if b <= a {
                            continue;
                        }
                        for (y, w) in cell_rule.mapped(a, b) {
                            if pi == 1 {
                                near_s += kernel_raw(&spec.bump, k, c, x, y) * w;
                            } else {
                                far_s += (kernel_raw(&spec.bump, k, c, x, y) - kernel_raw(&spec.bump, k, c, z, y)) * w;
                            }
                        }
                    }
                    let slot = k as usize - 1;
                    for w in 0..d {
                        far[j][slot][w] += far_s * fv[w];
                        near[j][slot][w] += near_s * fv[w];
                    }
                }
            }
            let a = rad2_norm(&double_terms(spec, &far, lattice)?, 2.0, &src)?.value;
            let b = rad2_norm(&double_terms(spec, &near, lattice)?, 2.0, &src)?.value;
            Ok((a, b))
        })
        .collect::<Result<_>>()?;

    let len = ib - ia;
    let a = xw.iter().zip(&per_x).map(|((_, w), (v, _))| w * v).sum::<f64>() / len;
    let b = xw.iter().zip(&per_x).map(|((_, w), (_, v))| w * v).sum::<f64>() / len;
    Ok(BmoReport {
        interval: iv.clone(),
        a,
        b,
        seed: src.seed,
        trials: src.ensemble(ens_width)?.trials(),
        exhaustive: ens_width <= crate::rademacher::EXHAUSTIVE_MAX_SIGNS,
        x_nodes: xw.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::rat;
    use crate::spectral::make_adapted_bump;

    fn standard() -> KernelSpec {
        KernelSpec::new(&DisjointFamily::from_ints(&[(0, 20), (30, 50)]).unwrap(), make_adapted_bump().unwrap()).unwrap()
    }

    const SRC: SignSource = SignSource { seed: 5, trials: 512 };

    #[test]
    fn centres_and_values() {
        let spec = standard();
        assert_eq!(spec.centre(0, 2), Some(&int(4)));
        assert_eq!(spec.centre(1, 1), Some(&int(31)));
        assert!(spec.splitting_holds());
        assert!(spec.gap_violations().is_empty());
        let bump = make_adapted_bump().unwrap();
        let v = kernel_value(&spec, 1, 3, 0.7, 0.7).unwrap();
        assert!((v.norm() - 8.0 * 1.5).abs() < 1e-9);
        let a = kernel_value(&spec, 0, 2, 0.3, -0.45).unwrap();
        assert!((a.norm() - 4.0 * bump.spatial(4.0 * 0.75).abs()).abs() < 1e-14);

        let short = KernelSpec::new(&DisjointFamily::from_ints(&[(0, 12)]).unwrap(), bump).unwrap();
        assert!(matches!(kernel_value(&short, 0, 3, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(kernel_value(&short, 0, 2, 0.0, 1.0).is_ok());
    }

    #[test]
    fn shell_examples() {
        let s = shell(0.0, 1.0, 1).unwrap();
        assert_eq!(s.left, (-3.0, -1.0));
        assert_eq!(s.right, (3.0, 5.0));
        assert!(s.contains(-3.0) && !s.contains(-1.0) && s.contains(5.0) && !s.contains(3.0));
        for (x, z, m) in [(0.25, -1.5, 3), (2.0, 2.125, 7), (-4.0, 9.0, 1)] {
            let s = shell(x, z, m).unwrap();
            assert!((s.measure() - 2f64.powi(m as i32 + 1) * (x - z).abs()).abs() < 1e-12);
            assert!(s.k0 <= s.k1);
        }
        assert!(matches!(shell(1.0, 1.0, 2), Err(Error::Domain(_))));
        let s = shell(0.0, 1.0, 3).unwrap();
        assert_eq!((s.k0, s.k1), (1, 1));
        let s = shell(0.0, 1.0 / 1024.0, 3).unwrap();
        assert_eq!(s.k0, 7);
        assert_eq!(s.k1, 8);
    }

    /// Separately coded composite Simpson oracle for a single `(j, k)`.
    fn simpson_single(bump: &AdaptedBump, k: u32, x: f64, z: f64, sh: &ShellSpec) -> f64 {
        let s = 2f64.powi(k as i32);
        let g = |y: f64| {
            let d = bump.spatial(s * (x - y)) - bump.spatial(s * (z - y));
            s * s * d * d
        };
        let mut total = 0.0;
        for (a, b) in [sh.left, sh.right] {
            let n = 200_000;
            let h = (b - a) / n as f64;
            let mut acc = g(a) + g(b);
            for i in 1..n {
                acc += g(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            total += acc * h / 3.0;
        }
        total
    }

    #[test]
    fn single_piece_matches_oracle() {
        let spec = standard();
        let bump = make_adapted_bump().unwrap();
        let lat = LatticeSpec::scalar();
        for (k, x, z, m) in [(1u32, 0.0, 1.0, 1u32), (2, 0.3, -0.2, 2), (3, 5.0, 4.0, 1), (1, 0.0, 1.0, 4)] {
            let mut lam = zero_lambda(&spec, 1);
            lam[0][k as usize - 1][0] = Complex64::new(1.0, 0.0);
            let got = kernel_difference_integral(&spec, lat, x, z, m, &lam, &SRC).unwrap();
            assert!((got.lambda_norm - 1.0).abs() < 1e-14);
            let want = simpson_single(&bump, k, x, z, &got.shell);
            assert!((got.value - want).abs() <= 1e-6 * want, "k={k}: {} vs {want}", got.value);
        }
    }

    #[test]
    fn trivial_integrals() {
        let spec = standard();
        let lat = LatticeSpec::new(2, 4.0).unwrap();
        let lam = random_lambda(&spec, 2, 1);
        assert_eq!(kernel_difference_integral(&spec, lat, 0.5, 0.5, 2, &lam, &SRC).unwrap().value, 0.0);
        let zero = zero_lambda(&spec, 2);
        assert_eq!(kernel_difference_integral(&spec, lat, 0.0, 1.0, 2, &zero, &SRC).unwrap().value, 0.0);
        assert!(kernel_difference_integral(&spec, LatticeSpec::new(2, 1.5).unwrap(), 0.0, 1.0, 2, &lam, &SRC).is_err());
    }

    #[test]
    fn swapping_points_on_a_fixed_shell() {
        let spec = standard();
        let lat = LatticeSpec::new(2, 3.0).unwrap();
        let lam = random_lambda(&spec, 2, 8);
        let sh = shell(0.0, 1.0, 2).unwrap();
        let a = kernel_difference_on_shell(&spec, lat, 0.0, 1.0, &sh, &lam, &SRC).unwrap().value;
        let b = kernel_difference_on_shell(&spec, lat, 1.0, 0.0, &sh, &lam, &SRC).unwrap().value;
        assert!((a - b).abs() <= 1e-12 * a, "{a} vs {b}");
    }

    #[test]
    fn decay_and_overlay() {
        let spec = standard();
        let lat = LatticeSpec::scalar();
        let zero = vec![zero_lambda(&spec, 1)];
        let rep = decay_fit_with(&spec, lat, 0.0, 1.0, &[1, 2, 3], &zero, &SRC).unwrap();
        assert!(rep.rows.iter().all(|r| r.a_m == 0.0));
        assert!(rep.slope.is_none());

        let rep = decay_fit(&spec, lat, 0.0, 1.0, &[1, 2, 3, 4], 2, 3).unwrap();
        assert!(rep.rows.iter().all(|r| r.a_m >= 0.0));
        assert!(rep.slope.unwrap() < -5.0 / 3.0 + 0.2, "{:?}", rep);

        let ov = alpha_overlay(&spec, lat, 0.0, 1.0, 2, &random_lambda(&spec, 1, 4), &SRC).unwrap();
        assert!(!ov.terms.is_empty() && ov.fitted_c.is_finite());
        assert!(decay_fit_with(&spec, lat, 0.0, 1.0, &[13], &zero, &SRC).is_err());
    }

    /// Closed form `Σ_{j,l} α_j ᾱ_l ∫_I e^{2πi(γ_j - γ_l)y} dy`.
    fn dirichlet_closed(gamma: &[f64], alpha: &[Complex64], a: f64, b: f64) -> f64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (gj, aj) in gamma.iter().zip(alpha) {
            for (gl, al) in gamma.iter().zip(alpha) {
                let w = 2.0 * PI * (gj - gl);
                let integral = if w == 0.0 {
                    Complex64::new(b - a, 0.0)
                } else {
                    (Complex64::new(0.0, w * b).exp() - Complex64::new(0.0, w * a).exp()) / Complex64::new(0.0, w)
                };
                total += aj * al.conj() * integral;
            }
        }
        total.re
    }

    #[test]
    fn dirichlet_examples() {
        let unit = Interval::from_ints(0, 1).unwrap();
        let g = [0.0, 1.0, 2.0, 5.0];
        let a = [1.0, -2.0, 0.5, 3.0].map(|x| Complex64::new(x, 0.3));
        assert!((dirichlet_gap_ratio(&g, &a, &unit).unwrap() - 1.0).abs() < 1e-10);
        let half = Interval::new(int(0), rat(1, 2)).unwrap();
        assert!((dirichlet_gap_ratio(&[3.7], &[Complex64::new(2.0, 0.0)], &half).unwrap() - 0.5).abs() < 1e-12);
        let r = dirichlet_gap_ratio(&[0.0, 1.5], &[Complex64::new(1.0, 0.0); 2], &unit).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(dirichlet_gap_ratio(&[0.0, 0.5], &[Complex64::new(1.0, 0.0); 2], &unit).is_err());

        let g = [-2.25, -1.0, 0.4, 2.0];
        let a = [0.5, 1.0, -1.5, 0.25].map(|x| Complex64::new(x, -x / 2.0));
        let iv = Interval::new(rat(-3, 4), rat(9, 4)).unwrap();
        let mass: f64 = a.iter().map(|x| x.norm_sqr()).sum();
        let want = dirichlet_closed(&g, &a, -0.75, 2.25) / (3.0 * mass);
        assert!((dirichlet_gap_ratio(&g, &a, &iv).unwrap() - want).abs() < 1e-11);
    }

    #[test]
    fn bmo_trivial_cases() {
        let spec = standard();
        let iv = Interval::from_ints(0, 4).unwrap();
        let zero = LatticeSignal::zeros(LatticeSpec::scalar(), int(64), 1024).unwrap();
        let rep = bmo_oscillation_report(&spec, &zero, -32.0, &iv, &SRC).unwrap();
        assert_eq!((rep.a, rep.b), (0.0, 0.0));

        // support (-1, 5] ⊂ 2I = (-2, 6]
        let inside = LatticeSignal::new(
            LatticeSpec::scalar(),
            int(8),
            (0..128).map(|n| Complex64::new(if n < 96 { 1.0 } else { 0.0 }, 0.0)).collect(),
        )
        .unwrap();
        let rep = bmo_oscillation_report(&spec, &inside, -1.0, &iv, &SRC).unwrap();
        assert_eq!(rep.a, 0.0);
        assert!(rep.b > 0.0);

        let big = LatticeSignal::constant(LatticeSpec::scalar(), int(8), 8, &[Complex64::new(2.0, 0.0)]).unwrap();
        assert!(bmo_oscillation_report(&spec, &big, 0.0, &iv, &SRC).is_err());
    }
}
