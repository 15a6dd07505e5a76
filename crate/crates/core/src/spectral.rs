//! Periodic grid signals, their normalized spectra, and the two kinds of
//! frequency projection: the sharp cut-off to an interval and the smooth
//! multiplier built from the adapted bump.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num::{BigInt, Signed, ToPrimitive, Zero};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::interval::{to_f64, Interval, Rational};
use crate::quad::GaussLegendre;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward transform normalized as `f̂(k) = (1/N) Σ f(n) e^{-2πikn/N}`.
pub fn forward(samples: &[Complex64]) -> Vec<Complex64> {
    let mut buf = samples.to_vec();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Inverse of [`forward`]: `f(n) = Σ f̂(k) e^{2πikn/N}`.
pub fn inverse(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(&mut buf);
    buf
}

/// Signed frequency index of FFT slot `idx` on an `n`-point grid.
#[inline]
pub fn bin_index(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// FFT slot holding signed frequency index `k`.
#[inline]
pub fn slot_of(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

pub(crate) fn check_grid(n: usize, period: &Rational) -> Result<()> {
    precondition!(
        n >= 8 && n.is_power_of_two(),
        "grid size {n} must be a power of two and at least 8"
    );
    precondition!(period.is_positive(), "period {period} must be positive");
    Ok(())
}

/// Samples `f(t_n)` at `t_n = nL/N` on a period-`L` torus.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSignal {
    samples: Vec<Complex64>,
    period: Rational,
}

impl GridSignal {
    pub fn new(samples: Vec<Complex64>, period: Rational) -> Result<Self> {
        check_grid(samples.len(), &period)?;
        precondition!(
            samples.iter().all(|c| c.re.is_finite() && c.im.is_finite()),
            "non-finite sample"
        );
        Ok(Self { samples, period })
    }

    pub fn zeros(n: usize, period: Rational) -> Result<Self> {
        Self::new(vec![Complex64::zero(); n], period)
    }

    /// Samples a function of time on the grid.
    pub fn from_fn(n: usize, period: Rational, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        check_grid(n, &period)?;
        let l = to_f64(&period);
        Self::new((0..n).map(|i| f(i as f64 * l / n as f64)).collect(), period)
    }

    /// `e^{2πi k t / L}`: the pure tone in bin `k`.
    pub fn tone(n: usize, period: Rational, k: i64) -> Result<Self> {
        check_grid(n, &period)?;
        let samples = (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * (k * i as i64).rem_euclid(n as i64) as f64 / n as f64))
            .collect();
        Self::new(samples, period)
    }

    pub fn impulse(n: usize, period: Rational) -> Result<Self> {
        let mut s = vec![Complex64::zero(); n];
        s[0] = Complex64::new(1.0, 0.0);
        Self::new(s, period)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn period(&self) -> &Rational {
        &self.period
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum {
            coeffs: forward(&self.samples),
            period: self.period.clone(),
        }
    }

    /// `(1/N) Σ |f(t)|²`.
    pub fn mean_energy(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.len() as f64
    }
}

/// Normalized DFT coefficients in FFT order; slot `i` carries frequency
/// `bin_index(i) / L`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<Complex64>,
    period: Rational,
}

impl Spectrum {
    pub fn new(coeffs: Vec<Complex64>, period: Rational) -> Result<Self> {
        check_grid(coeffs.len(), &period)?;
        Ok(Self { coeffs, period })
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn period(&self) -> &Rational {
        &self.period
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Exact frequency `k/L` of slot `idx`.
    pub fn frequency(&self, idx: usize) -> Rational {
        Rational::from_integer(BigInt::from(bin_index(idx, self.len()))) / &self.period
    }

    pub fn to_signal(&self) -> GridSignal {
        GridSignal {
            samples: inverse(&self.coeffs),
            period: self.period.clone(),
        }
    }

    /// `Σ |f̂(k)|²`, equal to the mean energy of the signal.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Signed indices `k` with `k/L ∈ (a, b]`, as an inclusive range clipped
    /// to the grid; empty when `lo > hi`.
    pub fn bins_in(&self, iv: &Interval) -> (i64, i64) {
        bins_in(iv, &self.period, self.len())
    }

    pub fn sharp_project(&self, iv: &Interval) -> Spectrum {
        let (lo, hi) = self.bins_in(iv);
        let n = self.len();
        let mut out = vec![Complex64::zero(); n];
        for k in lo..=hi {
            let s = slot_of(k, n);
            out[s] = self.coeffs[s];
        }
        Spectrum {
            coeffs: out,
            period: self.period.clone(),
        }
    }

    /// Multiplies slot `i` by `m(k/L)`.
    pub fn apply_multiplier(&self, m: impl Fn(f64) -> f64) -> Spectrum {
        let n = self.len();
        let l = to_f64(&self.period);
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * m(bin_index(i, n) as f64 / l))
            .collect();
        Spectrum {
            coeffs,
            period: self.period.clone(),
        }
    }

    pub fn smooth_project(&self, iv: &Interval, bump: &AdaptedBump) -> Spectrum {
        let (c, len) = (to_f64(&iv.centre()), to_f64(&iv.length()));
        self.apply_multiplier(|xi| bump.fourier((xi - c) / len))
    }
}

/// Signed bin range `[lo, hi]` with `k/L ∈ (a, b]`, clipped to
/// `[-N/2, N/2 - 1]`.
pub fn bins_in(iv: &Interval, period: &Rational, n: usize) -> (i64, i64) {
    // k/L ∈ (a, b]  <=>  aL < k <= bL
    let lo = (iv.left() * period).floor().to_integer() + BigInt::from(1);
    let hi = (iv.right() * period).floor().to_integer();
    let half = n as i64 / 2;
    let clip = |x: BigInt| -> i64 {
        if x < BigInt::from(-half) {
            -half - 1
        } else if x > BigInt::from(half) {
            half
        } else {
            x.to_i64().unwrap()
        }
    };
    (clip(lo).max(-half), clip(hi).min(half - 1))
}

/// `S_I f`: keep exactly the bins whose frequency lies in `(a, b]`.
pub fn sharp_project(f: &GridSignal, iv: &Interval) -> GridSignal {
    f.spectrum().sharp_project(iv).to_signal()
}

/// `ψ_I * f` with `ψ̂_I(ξ) = ψ̂((ξ - c_I)/|I|)`.
pub fn smooth_project(f: &GridSignal, iv: &Interval, bump: &AdaptedBump) -> GridSignal {
    f.spectrum().smooth_project(iv, bump).to_signal()
}

fn glue(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Transition profile `h(s) = σ(1-s) / (σ(s) + σ(1-s))`, `σ(s) = e^{-1/s}`.
pub fn transition(s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    if s >= 1.0 {
        return 0.0;
    }
    let (u, v) = (glue(s), glue(1.0 - s));
    v / (u + v)
}

/// Grid spacing of the cached spatial profile.
pub const BUMP_STEP: f64 = 1.0 / 256.0;
/// Spatial truncation radius: `ψ(x)` is taken as zero for `|x| > BUMP_X_MAX`.
pub const BUMP_X_MAX: f64 = 96.0;
/// Successive-refinement tolerance of the spatial quadrature.
pub const BUMP_QUAD_TOL: f64 = 1e-10;

/// A smooth even bump with `χ_[-1/2,1/2] ≤ ψ̂ ≤ χ_[-1,1]`, its Fourier side
/// in closed form and its spatial side cached on a fine grid.
#[derive(Clone, Debug)]
pub struct AdaptedBump {
    step: f64,
    x_max: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpMetadata {
    pub step: f64,
    pub x_max: f64,
    pub quad_tol: f64,
    pub tail_value: f64,
    pub decay_constant: f64,
}

static STANDARD_BUMP: OnceLock<std::result::Result<Arc<AdaptedBump>, Error>> = OnceLock::new();

/// The standard bump, built once per process and shared.
pub fn make_adapted_bump() -> Result<Arc<AdaptedBump>> {
    STANDARD_BUMP
        .get_or_init(|| AdaptedBump::build(BUMP_STEP, BUMP_X_MAX).map(Arc::new))
        .clone()
}

impl AdaptedBump {
    pub fn build(step: f64, x_max: f64) -> Result<Self> {
        precondition!(step > 0.0 && x_max > step, "bad bump grid");
        let count = (x_max / step).round() as usize + 1;
        let rule = GaussLegendre::new(12);
        let pts: Vec<(f64, f64)> = {
            use rayon::prelude::*;
            (0..count)
                .into_par_iter()
                .map(|i| spatial_pair(i as f64 * step, &rule))
                .collect::<Result<_>>()?
        };
        let (values, slopes) = pts.into_iter().unzip();
        Ok(Self {
            step,
            x_max: (count - 1) as f64 * step,
            values,
            slopes,
        })
    }

    /// `ψ̂(ξ)`.
    pub fn fourier(&self, xi: f64) -> f64 {
        fourier_profile(xi)
    }

    /// `ψ(x)` from the cache by cubic Hermite interpolation; zero beyond
    /// the truncation radius.
    pub fn spatial(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax > self.x_max {
            return 0.0;
        }
        let pos = ax / self.step;
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let t = pos - i as f64;
        let (p0, p1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1
    }

    /// `ψ(x)` by direct quadrature of the inverse Fourier integral.
    pub fn spatial_direct(x: f64) -> Result<f64> {
        spatial_pair(x, &GaussLegendre::new(12)).map(|(v, _)| v)
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// `max |x|² |ψ(x)|` over the cached nodes.
    pub fn decay_constant(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (i as f64 * self.step).powi(2) * v.abs())
            .fold(0.0, f64::max)
    }

    pub fn metadata(&self) -> BumpMetadata {
        BumpMetadata {
            step: self.step,
            x_max: self.x_max,
            quad_tol: BUMP_QUAD_TOL,
            tail_value: self.values.last().copied().unwrap_or(0.0),
            decay_constant: self.decay_constant(),
        }
    }
}

/// `ψ̂(ξ)`: 1 on `|ξ| ≤ 1/2`, `h(2|ξ| - 1)` in between, 0 for `|ξ| ≥ 1`.
pub fn fourier_profile(xi: f64) -> f64 {
    let a = xi.abs();
    if a <= 0.5 {
        1.0
    } else if a >= 1.0 {
        0.0
    } else {
        transition(2.0 * a - 1.0)
    }
}

/// `(ψ(x), ψ'(x))` with `ψ(x) = 2∫_0^1 ψ̂(ξ) cos(2πxξ) dξ`, by composite
/// Gauss-Legendre on `[0, 1/2]` and `[1/2, 1]` with panel doubling.
fn spatial_pair(x: f64, rule: &GaussLegendre) -> Result<(f64, f64)> {
    let eval = |panels: usize| -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        for (lo, hi) in [(0.0, 0.5), (0.5, 1.0)] {
            let h = (hi - lo) / panels as f64;
            for p in 0..panels {
                let a = lo + h * p as f64;
                for (xi, w) in rule.mapped(a, a + h) {
                    let m = fourier_profile(xi);
                    let (s, c) = (2.0 * PI * x * xi).sin_cos();
                    v += w * m * c;
                    d += w * m * xi * s;
                }
            }
        }
        (2.0 * v, -4.0 * PI * d)
    };
    let mut panels = (x.abs().ceil() as usize).max(2);
    let mut prev = eval(panels);
    for _ in 0..14 {
        panels *= 2;
        let next = eval(panels);
        if (next.0 - prev.0).abs() < BUMP_QUAD_TOL && (next.1 - prev.1).abs() < BUMP_QUAD_TOL * (1.0 + x.abs()) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Numerical(format!("bump quadrature at x = {x} did not converge")))
}

/// Whether `x ∈ (a, b]` for a float frequency and a rational interval,
/// decided exactly when `x = k/L`.
pub fn bin_in(k: i64, period: &Rational, iv: &Interval) -> bool {
    let x = Rational::from_integer(BigInt::from(k)) / period;
    iv.contains(&x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::{int, rat};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Naive DFT with the same normalization, independent of rustfft.
    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * t) as f64 / n as f64))
                    .sum::<Complex64>()
                    / n as f64
            })
            .collect()
    }

    #[test]
    fn fft_matches_naive_dft() {
        let x: Vec<Complex64> = (0..16).map(|i| c((i as f64 * 0.7).sin(), (i as f64).cos())).collect();
        let a = forward(&x);
        let b = naive_dft(&x);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).norm() < 1e-13);
        }
        let back = inverse(&a);
        for (u, v) in back.iter().zip(&x) {
            assert!((u - v).norm() < 1e-13);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(GridSignal::zeros(6, int(1)).is_err());
        assert!(GridSignal::zeros(4, int(1)).is_err());
        assert!(GridSignal::zeros(8, int(0)).is_err());
        assert!(GridSignal::zeros(8, int(1)).is_ok());
    }

    #[test]
    fn tone_has_unit_coefficient() {
        let f = GridSignal::tone(8, int(8), 3).unwrap();
        let s = f.spectrum();
        assert!((s.coeffs()[3] - c(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(s.frequency(3), rat(3, 8));
        assert_eq!(s.frequency(5), rat(-3, 8));
    }

    #[test]
    fn sharp_in_band_and_out_of_band() {
        let f = GridSignal::tone(8, int(8), 3).unwrap();
        let kept = sharp_project(&f, &Interval::new(int(0), rat(1, 2)).unwrap());
        for (u, v) in kept.samples().iter().zip(f.samples()) {
            assert!((u - v).norm() < 1e-14);
        }
        let gone = sharp_project(&f, &Interval::new(rat(1, 2), int(1)).unwrap());
        assert!(gone.samples().iter().all(|u| u.norm() < 1e-15));
    }

    #[test]
    fn sharp_impulse_keeps_bins_zero_and_one() {
        let f = GridSignal::impulse(8, int(8)).unwrap();
        let out = sharp_project(&f, &Interval::new(rat(-1, 8), rat(1, 8)).unwrap());
        for (n, v) in out.samples().iter().enumerate() {
            let want = (c(1.0, 0.0) + Complex64::from_polar(1.0, 2.0 * PI * n as f64 / 8.0)) / 8.0;
            assert!((v - want).norm() < 1e-15, "n={n}");
        }
    }

    #[test]
    fn bins_clip_to_grid() {
        let iv = Interval::new(int(-100), int(100)).unwrap();
        assert_eq!(bins_in(&iv, &int(1), 8), (-4, 3));
        let iv = Interval::new(int(50), int(60)).unwrap();
        let (lo, hi) = bins_in(&iv, &int(1), 8);
        assert!(lo > hi);
        // endpoint membership is half-open
        let iv = Interval::new(int(1), int(2)).unwrap();
        assert_eq!(bins_in(&iv, &int(1), 16), (2, 2));
    }

    #[test]
    fn sharp_projection_is_idempotent_on_spectra() {
        let f = GridSignal::from_fn(64, rat(3, 2), |t| c(t.sin() + 0.3 * (7.0 * t).cos(), t.cos())).unwrap();
        let s = f.spectrum();
        let iv = Interval::new(rat(-5, 3), rat(7, 2)).unwrap();
        let once = s.sharp_project(&iv);
        assert_eq!(once.sharp_project(&iv), once);
        assert!(once.energy() <= s.energy());
    }

    #[test]
    fn parseval_holds() {
        let f = GridSignal::from_fn(32, int(2), |t| c((3.0 * t).sin(), t * t)).unwrap();
        let s = f.spectrum();
        assert!((f.mean_energy() - s.energy()).abs() < 1e-12 * f.mean_energy());
    }

    #[test]
    fn profile_values() {
        assert_eq!(fourier_profile(0.0), 1.0);
        assert_eq!(fourier_profile(0.5), 1.0);
        assert_eq!(fourier_profile(1.0), 0.0);
        assert!((fourier_profile(0.75) - 0.5).abs() < 1e-15);
        assert!((fourier_profile(-0.75) - 0.5).abs() < 1e-15);
        for i in 0..=200 {
            let xi = -1.5 + 3.0 * i as f64 / 200.0;
            let v = fourier_profile(xi);
            let lower = if xi.abs() <= 0.5 { 1.0 } else { 0.0 };
            let upper = if xi.abs() <= 1.0 { 1.0 } else { 0.0 };
            assert!(lower <= v && v <= upper, "xi={xi}");
        }
    }

    #[test]
    fn bump_centre_value_is_its_area() {
        let psi0 = AdaptedBump::spatial_direct(0.0).unwrap();
        // Independent oracle: Simpson on ψ̂ over [-1, 1].
        let m = 20_000;
        let h = 2.0 / m as f64;
        let mut s = fourier_profile(-1.0) + fourier_profile(1.0);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * fourier_profile(-1.0 + i as f64 * h);
        }
        let area = s * h / 3.0;
        assert!((psi0 - area).abs() < 1e-8, "{psi0} vs {area}");
        assert!(psi0 > 1.0 && psi0 < 2.0);
        // symmetric profile: area is exactly 3/2
        assert!((psi0 - 1.5).abs() < 1e-9);
    }

    #[test]
    fn cached_bump_matches_direct_quadrature() {
        let bump = make_adapted_bump().unwrap();
        for &x in &[0.0, 0.013, 0.5, 1.0, 2.71, 7.3, 19.9, 40.05, 77.7] {
            let direct = AdaptedBump::spatial_direct(x).unwrap();
            assert!((bump.spatial(x) - direct).abs() < 1e-9, "x={x}");
            assert!((bump.spatial(-x) - direct).abs() < 1e-9, "x=-{x}");
        }
        assert_eq!(bump.spatial(BUMP_X_MAX + 1.0), 0.0);
    }

    #[test]
    fn smooth_projection_examples() {
        let bump = make_adapted_bump().unwrap();
        let iv = Interval::new(int(0), int(1)).unwrap();
        // L = 4: bin 2 is 1/2, bin 8 is 2, bin 5 is 5/4
        let f = GridSignal::tone(32, int(4), 2).unwrap();
        let g = smooth_project(&f, &iv, &bump);
        for (u, v) in g.samples().iter().zip(f.samples()) {
            assert!((u - v).norm() < 1e-14);
        }
        let f = GridSignal::tone(32, int(4), 8).unwrap();
        assert!(smooth_project(&f, &iv, &bump).samples().iter().all(|u| u.norm() < 1e-15));
        let f = GridSignal::tone(32, int(4), 5).unwrap();
        let g = smooth_project(&f, &iv, &bump);
        for (u, v) in g.samples().iter().zip(f.samples()) {
            assert!((u - v * 0.5).norm() < 1e-14);
        }
    }

    #[test]
    fn reproducing_identity() {
        let bump = make_adapted_bump().unwrap();
        let f = GridSignal::from_fn(128, int(4), |t| c((5.0 * t).sin() + t.cos(), (t * 3.0).sin())).unwrap();
        let iv = Interval::new(rat(-3, 2), rat(5, 3)).unwrap();
        let sharp = f.spectrum().sharp_project(&iv);
        let both = sharp.smooth_project(&iv, &bump);
        for (u, v) in both.coeffs().iter().zip(sharp.coeffs()) {
            assert!((u - v).norm() <= 1e-15);
        }
    }
}

