//! Finite-dimensional lattice values `X = ℓ^r_d` and functions on the grid
//! with values in them: Bochner-type mixed norms, pointwise square sums and
//! the 2-concavification `X_(2) = ℓ^{r/2}_d`.

use num::ToPrimitive;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{precondition, Error, Result};
use crate::interval::{int, Rational};
use crate::spectral::{check_grid, GridSignal};

/// Exponents in `[1, ∞]`; `f64::INFINITY` stands for `∞`.
pub mod exponent {
    use super::*;

    pub fn serialize<S: Serializer>(p: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if p.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*p)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad exponent {t:?}"))),
        }
    }
}

/// `ℓ^r` norm of moduli; `r = ∞` is the maximum.
pub fn lr_norm(moduli: impl Iterator<Item = f64>, r: f64) -> f64 {
    if r.is_infinite() {
        return moduli.fold(0.0, f64::max);
    }
    let v: Vec<f64> = moduli.collect();
    let m = v.iter().copied().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    if r == 1.0 {
        return v.iter().sum();
    }
    if r == 2.0 {
        return m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt();
    }
    m * v.iter().map(|x| (x / m).powf(r)).sum::<f64>().powf(1.0 / r)
}

/// The value space `ℓ^r_d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub d: usize,
    #[serde(with = "exponent")]
    pub r: f64,
}

impl LatticeSpec {
    pub fn new(d: usize, r: f64) -> Result<Self> {
        precondition!(d >= 1, "lattice dimension must be positive");
        precondition!(r >= 1.0, "lattice exponent {r} must lie in [1, ∞]");
        Ok(Self { d, r })
    }

    pub fn scalar() -> Self {
        Self { d: 1, r: 2.0 }
    }

    /// `X_(2)` is a lattice exactly when `X` is 2-convex, i.e. `r ≥ 2`.
    pub fn is_two_convex(&self) -> bool {
        self.r >= 2.0
    }

    /// `X* = ℓ^{r'}_d`.
    pub fn dual(&self) -> Self {
        let r = if self.r.is_infinite() {
            1.0
        } else if self.r == 1.0 {
            f64::INFINITY
        } else {
            self.r / (self.r - 1.0)
        };
        Self { d: self.d, r }
    }

    /// `ℓ^r` has cotype 2 for `r ≤ 2`.
    pub fn has_cotype_two(&self) -> bool {
        self.r <= 2.0
    }

    /// `X_(2) = ℓ^{r/2}_d`; requires `r ≥ 2`.
    pub fn concavified(&self) -> Result<Self> {
        precondition!(self.is_two_convex(), "ℓ^{} is not 2-convex", self.r);
        Ok(Self {
            d: self.d,
            r: self.r / 2.0,
        })
    }

    pub fn norm(&self, v: &[Complex64]) -> f64 {
        lr_norm(v.iter().map(|c| c.norm()), self.r)
    }

    pub fn norm_real(&self, v: &[f64]) -> f64 {
        lr_norm(v.iter().map(|x| x.abs()), self.r)
    }

    /// The quasi-norm `‖|v|^{1/2}‖²_X` defining `X_(2)`.
    pub fn concavified_quasi_norm(&self, v: &[f64]) -> f64 {
        let root: Vec<f64> = v.iter().map(|x| x.abs().sqrt()).collect();
        self.norm_real(&root).powi(2)
    }
}

/// `N × d` complex samples on a period-`L` grid, row `t` being `F(t_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSignal {
    spec: LatticeSpec,
    period: Rational,
    n: usize,
    values: Vec<Complex64>,
}

impl LatticeSignal {
    pub fn new(spec: LatticeSpec, period: Rational, values: Vec<Complex64>) -> Result<Self> {
        precondition!(
            values.len() % spec.d == 0,
            "{} values do not fill rows of width {}",
            values.len(),
            spec.d
        );
        let n = values.len() / spec.d;
        check_grid(n, &period)?;
        precondition!(
            values.iter().all(|c| c.re.is_finite() && c.im.is_finite()),
            "non-finite lattice value"
        );
        Ok(Self {
            spec,
            period,
            n,
            values,
        })
    }

    pub fn zeros(spec: LatticeSpec, period: Rational, n: usize) -> Result<Self> {
        Self::new(spec, period, vec![Complex64::new(0.0, 0.0); n * spec.d])
    }

    /// Every grid point carries the same value.
    pub fn constant(spec: LatticeSpec, period: Rational, n: usize, value: &[Complex64]) -> Result<Self> {
        precondition!(value.len() == spec.d, "value has {} entries, expected {}", value.len(), spec.d);
        Self::new(spec, period, value.iter().copied().cycle().take(n * spec.d).collect())
    }

    pub fn from_channels(spec: LatticeSpec, channels: &[GridSignal]) -> Result<Self> {
        precondition!(channels.len() == spec.d, "{} channels for d = {}", channels.len(), spec.d);
        let n = channels[0].len();
        let period = channels[0].period().clone();
        for c in channels {
            precondition!(c.len() == n && c.period() == &period, "channels live on different grids");
        }
        let mut values = Vec::with_capacity(n * spec.d);
        for t in 0..n {
            values.extend(channels.iter().map(|c| c.samples()[t]));
        }
        Self::new(spec, period, values)
    }

    pub fn from_scalar(f: &GridSignal) -> Self {
        Self {
            spec: LatticeSpec::scalar(),
            period: f.period().clone(),
            n: f.len(),
            values: f.samples().to_vec(),
        }
    }

    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn with_spec(mut self, spec: LatticeSpec) -> Result<Self> {
        precondition!(spec.d == self.spec.d, "dimension change {} -> {}", self.spec.d, spec.d);
        self.spec = spec;
        Ok(self)
    }

    pub fn period(&self) -> &Rational {
        &self.period
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.spec.d
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[Complex64] {
        &self.values[t * self.spec.d..(t + 1) * self.spec.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.values.chunks_exact(self.spec.d)
    }

    pub fn channel(&self, w: usize) -> GridSignal {
        let samples = self.rows().map(|r| r[w]).collect();
        GridSignal::new(samples, self.period.clone()).expect("grid already validated")
    }

    pub fn channels(&self) -> Vec<GridSignal> {
        (0..self.spec.d).map(|w| self.channel(w)).collect()
    }

    /// Applies a scalar operator channel by channel (`F(·, ω) ↦ T F(·, ω)`).
    pub fn map_channels(&self, op: impl Fn(&GridSignal) -> GridSignal) -> LatticeSignal {
        let chans: Vec<GridSignal> = self.channels().iter().map(op).collect();
        LatticeSignal::from_channels(self.spec, &chans).expect("channel operator preserved the grid")
    }

    /// Pointwise modulus `|F|`.
    pub fn modulus(&self) -> LatticeSignal {
        self.map_values(|c| Complex64::new(c.norm(), 0.0))
    }

    pub fn map_values(&self, f: impl Fn(Complex64) -> Complex64) -> LatticeSignal {
        LatticeSignal {
            spec: self.spec,
            period: self.period.clone(),
            n: self.n,
            values: self.values.iter().map(|&c| f(c)).collect(),
        }
    }

    /// `‖F(t)‖_X` for every grid point.
    pub fn pointwise_norms(&self) -> Vec<f64> {
        self.rows().map(|r| self.spec.norm(r)).collect()
    }

    pub fn same_grid(&self, other: &LatticeSignal) -> bool {
        self.n == other.n && self.spec == other.spec && self.period == other.period
    }

    pub fn sup_norm(&self) -> f64 {
        self.pointwise_norms().into_iter().fold(0.0, f64::max)
    }
}

/// `(mean_t |x_t|^p)^{1/p}`, or the maximum when `p = ∞`.
pub fn lp_mean(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    if p.is_infinite() {
        return xs.iter().fold(0.0, |m, x| m.max(x.abs()));
    }
    let m = xs.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = xs.iter().map(|x| (x.abs() / m).powf(p)).sum();
    m * (s / xs.len() as f64).powf(1.0 / p)
}

/// `‖F‖_{L^p(grid; X)}` with the normalized counting measure.
pub fn mixed_norm(f: &LatticeSignal, p: f64) -> f64 {
    lp_mean(&f.pointwise_norms(), p)
}

/// Pointwise, coordinatewise `(Σ_j |g_j(t, ω)|²)^{1/2}`.
pub fn square_sum(gs: &[LatticeSignal]) -> Result<LatticeSignal> {
    let first = gs
        .first()
        .ok_or_else(|| Error::Precondition("square sum of an empty list".into()))?;
    for g in gs {
        precondition!(g.same_grid(first), "square sum over signals on different grids or specs");
    }
    let mut acc = vec![0.0f64; first.values.len()];
    for g in gs {
        for (a, v) in acc.iter_mut().zip(&g.values) {
            *a += v.norm_sqr();
        }
    }
    Ok(LatticeSignal {
        spec: first.spec,
        period: first.period.clone(),
        n: first.n,
        values: acc.into_iter().map(|s| Complex64::new(s.sqrt(), 0.0)).collect(),
    })
}

/// `‖F‖_{L^p(grid; X_(2))}` with `X_(2) = ℓ^{r/2}_d`; requires `r ≥ 2`.
pub fn concavified_norm(f: &LatticeSignal, p: f64) -> Result<f64> {
    let conc = f.spec.concavified()?;
    let norms: Vec<f64> = f.rows().map(|r| conc.norm(r)).collect();
    Ok(lp_mean(&norms, p))
}

/// Both sides of the 2-convexity inequality
/// `‖(Σ|f_j|²)^{1/2}‖_X ≤ (Σ‖f_j‖²_X)^{1/2}` for vectors of `X`.
pub fn two_convexity_sides(spec: &LatticeSpec, fs: &[Vec<Complex64>]) -> (f64, f64) {
    let mut sq = vec![0.0; spec.d];
    for f in fs {
        for (s, v) in sq.iter_mut().zip(f) {
            *s += v.norm_sqr();
        }
    }
    let root: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();
    let lhs = spec.norm_real(&root);
    let rhs = fs.iter().map(|f| spec.norm(f).powi(2)).sum::<f64>().sqrt();
    (lhs, rhs)
}

#[derive(Serialize, Deserialize)]
struct LatticeSignalRepr {
    n: usize,
    d: usize,
    #[serde(with = "exponent")]
    r: f64,
    period: [i64; 2],
    data: Vec<Vec<[f64; 2]>>,
}

impl Serialize for LatticeSignal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let period = [
            self.period.numer().to_i64().ok_or_else(|| serde::ser::Error::custom("period numerator too large"))?,
            self.period.denom().to_i64().ok_or_else(|| serde::ser::Error::custom("period denominator too large"))?,
        ];
        LatticeSignalRepr {
            n: self.n,
            d: self.spec.d,
            r: self.spec.r,
            period,
            data: self.rows().map(|r| r.iter().map(|c| [c.re, c.im]).collect()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticeSignal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = LatticeSignalRepr::deserialize(d)?;
        if repr.period[1] == 0 {
            return Err(D::Error::custom("zero period denominator"));
        }
        if repr.data.len() != repr.n || repr.data.iter().any(|r| r.len() != repr.d) {
            return Err(D::Error::custom("data shape does not match header"));
        }
        let spec = LatticeSpec::new(repr.d, repr.r).map_err(D::Error::custom)?;
        let period = Rational::new(repr.period[0].into(), repr.period[1].into());
        let values = repr.data.into_iter().flatten().map(|[re, im]| Complex64::new(re, im)).collect();
        LatticeSignal::new(spec, period, values).map_err(D::Error::custom)
    }
}

/// Interleaved `[re, im, re, im, ...]` with an `n` and period header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub n: usize,
    pub period: [i64; 2],
    pub data: Vec<f64>,
}

impl SignalRecord {
    pub fn from_signal(f: &GridSignal) -> Result<Self> {
        let p = f.period();
        let period = [
            p.numer().to_i64().ok_or_else(|| Error::Domain("period numerator too large".into()))?,
            p.denom().to_i64().ok_or_else(|| Error::Domain("period denominator too large".into()))?,
        ];
        Ok(Self {
            n: f.len(),
            period,
            data: f.samples().iter().flat_map(|c| [c.re, c.im]).collect(),
        })
    }

    pub fn to_signal(&self) -> Result<GridSignal> {
        precondition!(self.data.len() == 2 * self.n, "record holds {} reals for n = {}", self.data.len(), self.n);
        precondition!(self.period[1] != 0, "zero period denominator");
        let period = Rational::new(self.period[0].into(), self.period[1].into());
        let samples = self.data.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        GridSignal::new(samples, period)
    }
}

/// The period-1 helper used throughout the tests and corpora.
pub fn unit_period() -> Rational {
    int(1)
}
