//! Discrete Hardy-Littlewood maximal functions `M`, `M_q` and the sharp
//! function `f♯` over all periodic index windows of the grid.
//!
//! Every window `{s, s+1, ..., s+ℓ-1} mod N` with `1 ≤ ℓ ≤ N` is scanned, so
//! values are exact up to floating summation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::lattice::{exponent, lp_mean, LatticeSignal, LatticeSpec};
use crate::spectral::GridSignal;

/// For every start `s`, `best(s, ℓ) = max_{ℓ' ≥ ℓ} score(s, ℓ')`; then
/// `out[t] = max_s best(s, (t - s) mod N + 1)`.
fn scan_windows<F>(n: usize, scores: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    (0..n)
        .into_par_iter()
        .fold(
            || (vec![0.0f64; n], vec![0.0f64; n]),
            |(mut out, mut buf), s| {
                scores(s, &mut buf);
                for l in (0..n - 1).rev() {
                    buf[l] = buf[l].max(buf[l + 1]);
                }
                for (off, b) in buf.iter().enumerate() {
                    let t = (s + off) % n;
                    out[t] = out[t].max(*b);
                }
                (out, buf)
            },
        )
        .map(|(out, _)| out)
        .reduce(
            || vec![0.0f64; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = x.max(y);
                }
                a
            },
        )
}

/// `M a(t) = max_{W ∋ t} mean_W a` for nonnegative `a`.
pub fn maximal_values(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    scan_windows(n, |s, buf| {
        let mut sum = 0.0;
        for (l, b) in buf.iter_mut().enumerate() {
            sum += a[(s + l) % n];
            *b = sum / (l + 1) as f64;
        }
    })
}

/// `M_q a = (M |a|^q)^{1/q}`.
pub fn mq_values(a: &[f64], q: f64) -> Result<Vec<f64>> {
    precondition!(q >= 1.0 && q.is_finite(), "maximal exponent q = {q} must lie in [1, ∞)");
    if q == 1.0 {
        return Ok(maximal_values(&a.iter().map(|x| x.abs()).collect::<Vec<_>>()));
    }
    let pow: Vec<f64> = a.iter().map(|x| x.abs().powf(q)).collect();
    Ok(maximal_values(&pow).into_iter().map(|v| v.powf(1.0 / q)).collect())
}

/// Fenwick tree over value ranks holding counts and sums.
struct Fenwick {
    count: Vec<u32>,
    sum: Vec<f64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self {
            count: vec![0; n + 1],
            sum: vec![0.0; n + 1],
        }
    }

    fn add(&mut self, rank: usize, v: f64) {
        let mut i = rank + 1;
        while i < self.count.len() {
            self.count[i] += 1;
            self.sum[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Count and sum over ranks `< k`.
    fn prefix(&self, k: usize) -> (u32, f64) {
        let (mut c, mut s) = (0, 0.0);
        let mut i = k;
        while i > 0 {
            c += self.count[i];
            s += self.sum[i];
            i -= i & i.wrapping_neg();
        }
        (c, s)
    }
}

/// `f♯` for real values: mean oscillation from window counts and sums of
/// the values below the window mean.
pub fn sharp_values_real(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sorted: Vec<f64> = f.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank: Vec<usize> = f.iter().map(|v| sorted.partition_point(|x| x < v)).collect();
    scan_windows(n, |s, buf| {
        let mut tree = Fenwick::new(n);
        let mut total = 0.0;
        for (l, b) in buf.iter_mut().enumerate() {
            let i = (s + l) % n;
            tree.add(rank[i], f[i]);
            total += f[i];
            let len = (l + 1) as f64;
            let m = total / len;
            let (c_lo, s_lo) = tree.prefix(sorted.partition_point(|x| *x <= m));
            let c_hi = (l + 1) as u32 - c_lo;
            let s_hi = total - s_lo;
            let osc = (m * c_lo as f64 - s_lo) + (s_hi - m * c_hi as f64);
            *b = osc.max(0.0) / len;
        }
    })
}

/// `f♯` for rows of `ℓ^r_d` (modulus when `d = 1`), by direct averaging.
pub fn sharp_values_rows(values: &[Complex64], spec: LatticeSpec) -> Vec<f64> {
    let d = spec.d;
    let n = values.len() / d;
    if n == 0 {
        return Vec::new();
    }
    scan_windows(n, |s, buf| {
        let mut total = vec![Complex64::new(0.0, 0.0); d];
        let mut diff = vec![Complex64::new(0.0, 0.0); d];
        for (l, b) in buf.iter_mut().enumerate() {
            let i = (s + l) % n;
            for (t, v) in total.iter_mut().zip(&values[i * d..(i + 1) * d]) {
                *t += v;
            }
            let len = (l + 1) as f64;
            let mut osc = 0.0;
            for o in 0..=l {
                let k = (s + o) % n;
                for w in 0..d {
                    diff[w] = values[k * d + w] - total[w] / len;
                }
                osc += spec.norm(&diff);
            }
            *b = osc / len;
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaximalMode {
    /// `M_q` applied to every coordinate `|f(·, ω)|`.
    Coordinatewise,
    /// `M_q` applied to `‖f(·)‖_X`.
    Norm,
}

/// `M_q f` for a scalar signal.
pub fn mq_maximal(f: &GridSignal, q: f64) -> Result<GridSignal> {
    let a: Vec<f64> = f.samples().iter().map(|c| c.norm()).collect();
    let m = mq_values(&a, q)?;
    GridSignal::new(m.into_iter().map(|v| Complex64::new(v, 0.0)).collect(), f.period().clone())
}

/// `M_q F` for a lattice signal. The `Norm` mode returns a scalar signal.
pub fn mq_maximal_lattice(f: &LatticeSignal, q: f64, mode: MaximalMode) -> Result<LatticeSignal> {
    match mode {
        MaximalMode::Coordinatewise => {
            let chans = f
                .channels()
                .iter()
                .map(|c| mq_maximal(c, q))
                .collect::<Result<Vec<_>>>()?;
            LatticeSignal::from_channels(f.spec(), &chans)
        }
        MaximalMode::Norm => {
            let m = mq_values(&f.pointwise_norms(), q)?;
            LatticeSignal::new(
                LatticeSpec::scalar(),
                f.period().clone(),
                m.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            )
        }
    }
}

/// `f♯`; the real fast path applies when every sample is real.
pub fn sharp_function(f: &GridSignal) -> GridSignal {
    let s = if f.samples().iter().all(|c| c.im == 0.0) {
        sharp_values_real(&f.samples().iter().map(|c| c.re).collect::<Vec<_>>())
    } else {
        sharp_values_rows(f.samples(), LatticeSpec::scalar())
    };
    GridSignal::new(s.into_iter().map(|v| Complex64::new(v, 0.0)).collect(), f.period().clone())
        .expect("grid already validated")
}

/// `F♯` with the lattice norm of the oscillation, as a scalar signal.
pub fn sharp_function_lattice(f: &LatticeSignal) -> GridSignal {
    let s = if f.dim() == 1 && f.values().iter().all(|c| c.im == 0.0) {
        sharp_values_real(&f.values().iter().map(|c| c.re).collect::<Vec<_>>())
    } else {
        sharp_values_rows(f.values(), f.spec())
    };
    GridSignal::new(s.into_iter().map(|v| Complex64::new(v, 0.0)).collect(), f.period().clone())
        .expect("grid already validated")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalReport {
    #[serde(with = "exponent")]
    pub p: f64,
    pub q: f64,
    pub mean_zero: bool,
    /// `‖f‖_p / ‖f♯‖_p`, only for mean-zero `f`.
    pub fs_ratio: Option<f64>,
    /// `‖M_q f‖_p / ‖f‖_p` (coordinatewise), only when `p > q`.
    pub mq_bound: Option<f64>,
    /// Relative gap in `‖M₂ f‖²_{L^p(X)} = ‖M(|f|²)‖_{L^{p/2}(X_(2))}`, when `r ≥ 2`.
    pub concavification_gap: Option<f64>,
}

fn is_mean_zero(values: &[Complex64], d: usize) -> bool {
    let n = values.len() / d;
    let scale = values.iter().map(|c| c.norm()).fold(0.0, f64::max);
    (0..d).all(|w| {
        let m: Complex64 = (0..n).map(|t| values[t * d + w]).sum::<Complex64>() / n as f64;
        m.norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE)
    })
}

fn column_maximal(values: &[f64], d: usize, q: f64) -> Result<Vec<f64>> {
    let n = values.len() / d;
    let mut out = vec![0.0; values.len()];
    for w in 0..d {
        let col: Vec<f64> = (0..n).map(|t| values[t * d + w]).collect();
        for (t, v) in mq_values(&col, q)?.into_iter().enumerate() {
            out[t * d + w] = v;
        }
    }
    Ok(out)
}

/// Norm comparisons on rows of `ℓ^r_d`; works for any row count.
pub fn maximal_norm_report_values(values: &[Complex64], spec: LatticeSpec, p: f64, q: f64) -> Result<MaximalReport> {
    precondition!(p >= 1.0, "exponent p = {p} must lie in [1, ∞]");
    precondition!(q >= 1.0 && q.is_finite(), "maximal exponent q = {q} must lie in [1, ∞)");
    let d = spec.d;
    precondition!(!values.is_empty() && values.len() % d == 0, "values do not form rows of width {d}");
    let moduli: Vec<f64> = values.iter().map(|c| c.norm()).collect();
    let row_norms = |v: &[f64], s: LatticeSpec| -> Vec<f64> { v.chunks_exact(d).map(|r| s.norm_real(r)).collect() };
    let f_norm = lp_mean(&row_norms(&moduli, spec), p);

    let mean_zero = is_mean_zero(values, d);
    let fs_ratio = if mean_zero {
        let sharp = if d == 1 && values.iter().all(|c| c.im == 0.0) {
            sharp_values_real(&values.iter().map(|c| c.re).collect::<Vec<_>>())
        } else {
            sharp_values_rows(values, spec)
        };
        let s = lp_mean(&sharp, p);
        Some(if s == 0.0 { 0.0 } else { f_norm / s })
    } else {
        None
    };

    let mq_bound = if p > q {
        let m = column_maximal(&moduli, d, q)?;
        Some(if f_norm == 0.0 { 0.0 } else { lp_mean(&row_norms(&m, spec), p) / f_norm })
    } else {
        None
    };

    let concavification_gap = if spec.is_two_convex() {
        let m2 = column_maximal(&moduli, d, 2.0)?;
        let lhs = lp_mean(&row_norms(&m2, spec), p).powi(2);
        let sq: Vec<f64> = moduli.iter().map(|x| x * x).collect();
        let m1 = column_maximal(&sq, d, 1.0)?;
        let rhs = lp_mean(&row_norms(&m1, spec.concavified()?), p / 2.0);
        let scale = lhs.abs().max(rhs.abs());
        Some(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale })
    } else {
        None
    };

    Ok(MaximalReport {
        p,
        q,
        mean_zero,
        fs_ratio,
        mq_bound,
        concavification_gap,
    })
}

pub fn maximal_norm_report(f: &LatticeSignal, p: f64, q: f64) -> Result<MaximalReport> {
    maximal_norm_report_values(f.values(), f.spec(), p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::int;
    use proptest::prelude::*;

    /// Cubic-time oracle: every window containing `t`, averaged directly.
    fn windows(n: usize, t: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for s in 0..n {
            for l in 1..=n {
                let w: Vec<usize> = (0..l).map(|o| (s + o) % n).collect();
                if w.contains(&t) {
                    out.push(w);
                }
            }
        }
        out
    }

    fn oracle_maximal(a: &[f64], q: f64) -> Vec<f64> {
        (0..a.len())
            .map(|t| {
                windows(a.len(), t)
                    .iter()
                    .map(|w| (w.iter().map(|&i| a[i].abs().powf(q)).sum::<f64>() / w.len() as f64).powf(1.0 / q))
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    fn oracle_sharp(f: &[f64]) -> Vec<f64> {
        (0..f.len())
            .map(|t| {
                windows(f.len(), t)
                    .iter()
                    .map(|w| {
                        let m = w.iter().map(|&i| f[i]).sum::<f64>() / w.len() as f64;
                        w.iter().map(|&i| (f[i] - m).abs()).sum::<f64>() / w.len() as f64
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    #[test]
    fn maximal_examples() {
        for q in [1.0, 2.0, 3.5] {
            assert!(mq_values(&[2.5; 8], q).unwrap().iter().all(|v| (v - 2.5).abs() < 1e-14));
        }
        let m = maximal_values(&[1.0, 0.0, 0.0, 0.0]);
        assert!((m[1] - 0.5).abs() < 1e-15);
        assert_eq!(m, oracle_maximal(&[1.0, 0.0, 0.0, 0.0], 1.0));
        assert!(matches!(mq_values(&[1.0], 0.5), Err(crate::Error::Precondition(_))));
    }

    #[test]
    fn sharp_examples() {
        assert!(sharp_values_real(&[3.0; 8]).iter().all(|v| *v == 0.0));
        let s = sharp_values_real(&[1.0, -1.0, 1.0, -1.0]);
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-15), "{s:?}");
        let s = sharp_values_rows(
            &[1.0, -1.0, 1.0, -1.0].map(|x| Complex64::new(x, 0.0)),
            LatticeSpec::scalar(),
        );
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn report_examples() {
        let spec = LatticeSpec::new(2, 2.0).unwrap();
        let f = LatticeSignal::constant(spec, int(1), 8, &[Complex64::new(1.0, 0.0), Complex64::new(-2.0, 0.0)]).unwrap();
        let rep = maximal_norm_report(&f, 4.0, 2.0).unwrap();
        assert!(!rep.mean_zero && rep.fs_ratio.is_none());
        assert!((rep.mq_bound.unwrap() - 1.0).abs() < 1e-14);
        assert!(maximal_norm_report(&f, 2.0, 2.0).unwrap().mq_bound.is_none());

        let g = [1.0, -1.0, 0.0, 0.0];
        let vals: Vec<Complex64> = g.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let rep = maximal_norm_report_values(&vals, LatticeSpec::scalar(), 2.0, 1.0).unwrap();
        let sharp = oracle_sharp(&g);
        let expected = lp_mean(&g, 2.0) / lp_mean(&sharp, 2.0);
        assert!(rep.mean_zero);
        assert!((rep.fs_ratio.unwrap() - expected).abs() < 1e-14);
    }

    fn real_vec(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn scan_matches_oracle(a in real_vec(1..14), q in 1.0f64..4.0) {
            let fast = mq_values(&a, q).unwrap();
            let slow = oracle_maximal(&a, q);
            for (x, y) in fast.iter().zip(&slow) {
                prop_assert!((x - y).abs() <= 1e-12 * y.max(1.0));
            }
        }

        #[test]
        fn sharp_matches_oracle(a in real_vec(1..14)) {
            let fast = sharp_values_real(&a);
            let rows = sharp_values_rows(&a.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>(), LatticeSpec::scalar());
            let slow = oracle_sharp(&a);
            for ((x, y), z) in fast.iter().zip(&slow).zip(&rows) {
                prop_assert!((x - y).abs() <= 1e-11 * y.max(1.0), "{x} vs {y}");
                prop_assert!((z - y).abs() <= 1e-11 * y.max(1.0));
            }
        }

        #[test]
        fn pointwise_relations(a in real_vec(1..40), b in real_vec(40..41)) {
            let abs: Vec<f64> = a.iter().map(|x| x.abs()).collect();
            let m1 = mq_values(&a, 1.0).unwrap();
            let m2 = mq_values(&a, 2.0).unwrap();
            let sharp = sharp_values_real(&a);
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x + y).abs()).collect();
            let mb = mq_values(&b[..a.len()], 1.0).unwrap();
            let ms = maximal_values(&sum);
            for t in 0..a.len() {
                prop_assert!(m1[t] >= abs[t] - 1e-12);
                prop_assert!(m2[t] >= m1[t] - 1e-12);
                prop_assert!(sharp[t] <= 2.0 * m1[t] + 1e-12);
                prop_assert!(ms[t] <= m1[t] + mb[t] + 1e-12);
            }
        }

        #[test]
        fn concavification_identity(
            vals in prop::collection::vec(-3.0f64..3.0, 48),
            r in prop_oneof![2.0f64..8.0, Just(f64::INFINITY)],
            p in 2.5f64..8.0,
        ) {
            let spec = LatticeSpec::new(3, r).unwrap();
            let v: Vec<Complex64> = vals.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
            let rep = maximal_norm_report_values(&v, spec, p, 2.0).unwrap();
            prop_assert!(rep.concavification_gap.unwrap() <= 1e-10);
        }
    }
}
