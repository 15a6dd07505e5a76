//! Square-function and Rademacher forms of the Littlewood-Paley-Rubio de
//! Francia ratios, the smooth square function `G` with its pointwise
//! domination by `M₂`, and randomized corpora for empirical constants.

use std::time::Duration;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::interval::{dyadic_decompose, int, rat, well_distributed_degree, DisjointFamily, Interval, Side};
use crate::lattice::{exponent, lp_mean, mixed_norm, LatticeSignal, LatticeSpec};
use crate::maximal::{mq_values, sharp_values_real};
use crate::rademacher::{rad2_norm, rad_norm, DoubleTerms, RadEstimate, SignSource, Terms};
use crate::rng::StreamRng;
use crate::spectral::{slot_of, AdaptedBump, GridSignal, Spectrum};

fn channel_spectra(f: &LatticeSignal) -> Vec<Spectrum> {
    f.channels().iter().map(|c| c.spectrum()).collect()
}

fn assemble(spec: LatticeSpec, chans: Vec<GridSignal>) -> LatticeSignal {
    LatticeSignal::from_channels(spec, &chans).expect("channels share one grid")
}

/// `S_I f` channel by channel.
pub fn sharp_project_lattice(f: &LatticeSignal, iv: &Interval) -> LatticeSignal {
    let chans = channel_spectra(f).iter().map(|s| s.sharp_project(iv).to_signal()).collect();
    assemble(f.spec(), chans)
}

/// `ψ_I * f` channel by channel.
pub fn smooth_project_lattice(f: &LatticeSignal, iv: &Interval, bump: &AdaptedBump) -> LatticeSignal {
    let chans = channel_spectra(f).iter().map(|s| s.smooth_project(iv, bump).to_signal()).collect();
    assemble(f.spec(), chans)
}

fn check_lpr_p(p: f64) -> Result<()> {
    precondition!(p >= 2.0, "LPR exponent p = {p} must be at least 2");
    Ok(())
}

fn projections(spectra: &[Spectrum], spec: LatticeSpec, fam: &DisjointFamily) -> Vec<LatticeSignal> {
    fam.intervals()
        .iter()
        .map(|iv| assemble(spec, spectra.iter().map(|s| s.sharp_project(iv).to_signal()).collect()))
        .collect()
}

fn square_ratio_from_spectra(spectra: &[Spectrum], spec: LatticeSpec, fam: &DisjointFamily, p: f64) -> f64 {
    let f = assemble(spec, spectra.iter().map(|s| s.to_signal()).collect());
    let denom = mixed_norm(&f, p);
    if denom == 0.0 {
        return 0.0;
    }
    let n = f.len();
    let d = spec.d;
    let mut acc = vec![0.0f64; n * d];
    for iv in fam.intervals() {
        for (w, s) in spectra.iter().enumerate() {
            let proj = s.sharp_project(iv).to_signal();
            for (t, v) in proj.samples().iter().enumerate() {
                acc[t * d + w] += v.norm_sqr();
            }
        }
    }
    let norms: Vec<f64> = acc
        .chunks_exact(d)
        .map(|r| spec.norm_real(&r.iter().map(|x| x.sqrt()).collect::<Vec<_>>()))
        .collect();
    lp_mean(&norms, p) / denom
}

/// `‖(Σ_j |S_{I_j} f|²)^{1/2}‖_{L^p(X)} / ‖f‖_{L^p(X)}`, zero for `f = 0`.
pub fn lpr_square_ratio(f: &LatticeSignal, fam: &DisjointFamily, p: f64) -> Result<f64> {
    check_lpr_p(p)?;
    Ok(square_ratio_from_spectra(&channel_spectra(f), f.spec(), fam, p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadMode {
    /// `‖Σ_j ε_j S_{I_j} f‖`.
    Direct,
    /// `max_u ‖Σ_j ε_j Σ_k ε'_k S_{I^u_{j,k}} f‖` over the dyadic pieces.
    Dyadic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadRatio {
    pub mode: RadMode,
    pub value: f64,
    pub stderr: f64,
    pub f_norm: f64,
    /// Per-side estimates in dyadic mode (`a` then `b`), the single estimate otherwise.
    pub estimates: Vec<RadEstimate>,
}

fn rad_ratio_from_spectra(
    spectra: &[Spectrum],
    spec: LatticeSpec,
    fam: &DisjointFamily,
    p: f64,
    src: &SignSource,
    mode: RadMode,
) -> Result<RadRatio> {
    let f = assemble(spec, spectra.iter().map(|s| s.to_signal()).collect());
    let f_norm = mixed_norm(&f, p);
    let scale = |x: f64| if f_norm == 0.0 { 0.0 } else { x / f_norm };
    match mode {
        RadMode::Direct => {
            let projs = projections(spectra, spec, fam);
            let terms = Terms::from_signals(&projs)?;
            let est = rad_norm(&terms, p, &src.ensemble(terms.len())?)?;
            Ok(RadRatio {
                mode,
                value: scale(est.value),
                stderr: scale(est.stderr),
                f_norm,
                estimates: vec![est],
            })
        }
        RadMode::Dyadic => {
            let min = fam.min_length();
            precondition!(
                min.is_some_and(|m| m >= int(4)),
                "dyadic mode needs every interval of length at least 4"
            );
            let dec = dyadic_decompose(fam)?;
            let mut estimates = Vec::with_capacity(2);
            for side in Side::BOTH {
                let array: Vec<Vec<LatticeSignal>> = dec
                    .entries
                    .iter()
                    .map(|e| {
                        e.pieces(side)
                            .iter()
                            .map(|piece| match piece {
                                Some(iv) => assemble(spec, spectra.iter().map(|s| s.sharp_project(iv).to_signal()).collect()),
                                None => LatticeSignal::zeros(spec, f.period().clone(), f.len()).expect("valid grid"),
                            })
                            .collect()
                    })
                    .collect();
                let terms = DoubleTerms::from_signals(&array)?;
                estimates.push(rad2_norm(&terms, p, src)?);
            }
            let best = if estimates[0].value >= estimates[1].value { 0 } else { 1 };
            Ok(RadRatio {
                mode,
                value: scale(estimates[best].value),
                stderr: scale(estimates[best].stderr),
                f_norm,
                estimates,
            })
        }
    }
}

/// Rademacher form of the ratio, with the estimate's standard error.
pub fn lpr_rad_ratio(f: &LatticeSignal, fam: &DisjointFamily, p: f64, src: &SignSource, mode: RadMode) -> Result<RadRatio> {
    check_lpr_p(p)?;
    rad_ratio_from_spectra(&channel_spectra(f), f.spec(), fam, p, src, mode)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DominationReport {
    /// `G(f)(t, ω) = (Σ_I |ψ_I * f(·, ω)|²)^{1/2}(t)`.
    pub g: LatticeSignal,
    /// `max_ω max_t G(f)♯(t, ω) / M₂ f(t, ω)` over points with `M₂ f > 0`.
    pub dom_ratio: f64,
    pub per_channel: Vec<f64>,
    /// Well-distributedness degree of the family.
    pub degree: usize,
}

/// Relative floor below which `M₂ f` counts as zero.
const M2_FLOOR: f64 = 1e-12;

pub fn g_domination_report(f: &LatticeSignal, fam: &DisjointFamily, bump: &AdaptedBump) -> Result<DominationReport> {
    let spectra = channel_spectra(f);
    let n = f.len();
    let mut g_chans = Vec::with_capacity(spectra.len());
    let mut per_channel = Vec::with_capacity(spectra.len());
    for s in &spectra {
        let mut acc = vec![0.0f64; n];
        for iv in fam.intervals() {
            let proj = s.smooth_project(iv, bump).to_signal();
            for (a, v) in acc.iter_mut().zip(proj.samples()) {
                *a += v.norm_sqr();
            }
        }
        let g: Vec<f64> = acc.into_iter().map(f64::sqrt).collect();
        let moduli: Vec<f64> = s.to_signal().samples().iter().map(|c| c.norm()).collect();
        let m2 = mq_values(&moduli, 2.0)?;
        let top = m2.iter().copied().fold(0.0, f64::max);
        let ratio = if top == 0.0 {
            0.0
        } else {
            let sharp = sharp_values_real(&g);
            sharp
                .iter()
                .zip(&m2)
                .filter(|(_, m)| **m > M2_FLOOR * top)
                .map(|(s, m)| s / m)
                .fold(0.0, f64::max)
        };
        per_channel.push(ratio);
        g_chans.push(GridSignal::new(g.into_iter().map(|v| Complex64::new(v, 0.0)).collect(), f.period().clone())?);
    }
    Ok(DominationReport {
        g: assemble(f.spec(), g_chans),
        dom_ratio: per_channel.iter().copied().fold(0.0, f64::max),
        per_channel,
        degree: well_distributed_degree(fam.intervals()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyParams {
    pub min_intervals: usize,
    pub max_intervals: usize,
    /// Interval lengths in frequency bins.
    pub min_len: usize,
    pub max_len: usize,
    /// Tile the whole signal band instead of placing separated intervals.
    pub covering: bool,
}

impl Default for FamilyParams {
    fn default() -> Self {
        Self {
            min_intervals: 1,
            max_intervals: 8,
            min_len: 4,
            max_len: 32,
            covering: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalParams {
    /// Coefficients live on bins `-band..band`.
    pub band: usize,
    /// Amplitudes decay like `(1 + |k|)^{-decay}`.
    pub decay: f64,
}

impl Default for SignalParams {
    fn default() -> Self {
        Self { band: 64, decay: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Integer period `L`; bin `k` sits at frequency `k/L`.
    pub period: i64,
    #[serde(with = "exponent")]
    pub p: f64,
    pub lattice: LatticeSpec,
    pub family: FamilyParams,
    pub signal: SignalParams,
    pub cases: usize,
    pub seed: u64,
    /// Monte Carlo trials for Rademacher estimates above the enumeration limit.
    pub trials: usize,
    pub refine_rounds: usize,
    pub rad_mode: Option<RadMode>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 1024,
            period: 1,
            p: 4.0,
            lattice: LatticeSpec::scalar(),
            family: FamilyParams::default(),
            signal: SignalParams::default(),
            cases: 100,
            seed: 0,
            trials: 256,
            refine_rounds: 100,
            rad_mode: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        crate::spectral::check_grid(self.n, &int(self.period))?;
        precondition!(self.p >= 2.0, "LPR exponent p = {} must be at least 2", self.p);
        LatticeSpec::new(self.lattice.d, self.lattice.r)?;
        let fp = &self.family;
        precondition!(
            fp.min_intervals >= 1 && fp.min_intervals <= fp.max_intervals,
            "interval count range {}..={} is empty",
            fp.min_intervals,
            fp.max_intervals
        );
        precondition!(fp.min_len >= 1 && fp.min_len <= fp.max_len, "interval length range is empty");
        let band = self.signal.band;
        precondition!(band >= 1 && band <= self.n / 2, "signal band {band} must lie in 1..={}", self.n / 2);
        precondition!(
            fp.max_intervals * if fp.covering { 1 } else { fp.min_len } <= 2 * band,
            "{} intervals do not fit in {} bins",
            fp.max_intervals,
            2 * band
        );
        precondition!(self.signal.decay.is_finite() && self.signal.decay >= 0.0, "decay must be finite and nonnegative");
        Ok(())
    }

    pub fn sign_source(&self, case_seed: u64) -> SignSource {
        SignSource::new(StreamRng::new(case_seed).stream(3).at(0), self.trials)
    }
}

/// Half-bin endpoints: the interval holds bins `start..start + len`.
pub fn bin_interval(start: i64, len: i64, period: i64) -> Interval {
    Interval::new(rat(2 * start - 1, 2 * period), rat(2 * (start + len) - 1, 2 * period)).expect("len >= 1")
}

/// Random disjoint family inside bins `lo..hi`.
pub fn random_family<R: Rng>(rng: &mut R, lo: i64, hi: i64, params: &FamilyParams, period: i64) -> Result<DisjointFamily> {
    let avail = (hi - lo) as usize;
    let j = rng.random_range(params.min_intervals..=params.max_intervals);
    if params.covering {
        precondition!(j <= avail, "cannot tile {avail} bins with {j} intervals");
        let mut cuts: Vec<i64> = Vec::with_capacity(j + 1);
        while cuts.len() < j - 1 {
            let c = rng.random_range(lo + 1..hi);
            if !cuts.contains(&c) {
                cuts.push(c);
            }
        }
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_unstable();
        let ivs = cuts.windows(2).map(|w| bin_interval(w[0], w[1] - w[0], period)).collect();
        return DisjointFamily::new(ivs);
    }
    precondition!(j * params.min_len <= avail, "{j} intervals of length {} do not fit in {avail} bins", params.min_len);
    let mut lens: Vec<usize> = (0..j).map(|_| rng.random_range(params.min_len..=params.max_len)).collect();
    while lens.iter().sum::<usize>() > avail {
        let (i, _) = lens.iter().enumerate().max_by_key(|(i, l)| (**l, usize::MAX - i)).unwrap();
        lens[i] -= 1;
    }
    let weights: Vec<f64> = (0..=j).map(|_| rng.random::<f64>()).collect();
    let wsum: f64 = weights.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let slack = avail - lens.iter().sum::<usize>();
    let mut pos = lo;
    let mut ivs = Vec::with_capacity(j);
    for (i, &len) in lens.iter().enumerate() {
        pos += (slack as f64 * weights[i] / wsum).floor() as i64;
        ivs.push(bin_interval(pos, len as i64, period));
        pos += len as i64;
    }
    DisjointFamily::new(ivs)
}

/// Random spectra on bins `-band..band`, one per channel.
pub fn random_spectra<R: Rng>(rng: &mut R, n: usize, period: i64, band: usize, decay: f64, d: usize) -> Result<Vec<Spectrum>> {
    let b = band as i64;
    (0..d)
        .map(|_| {
            let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
            for k in -b..b {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                let amp = (1.0 + k.abs() as f64).powf(-decay) / std::f64::consts::SQRT_2;
                coeffs[slot_of(k, n)] = Complex64::new(re, im) * amp;
            }
            Spectrum::new(coeffs, int(period))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub id: usize,
    pub seed: u64,
    pub family: DisjointFamily,
    pub spectra: Vec<Spectrum>,
}

impl Case {
    pub fn signal(&self, spec: LatticeSpec) -> LatticeSignal {
        assemble(spec, self.spectra.iter().map(|s| s.to_signal()).collect())
    }
}

pub fn case_seed(master: u64, id: usize) -> u64 {
    StreamRng::derive_seed(master, id as u64)
}

/// Family from stream 0, signal from stream 1 of the case seed.
pub fn generate_case(cfg: &ExperimentConfig, id: usize) -> Result<Case> {
    let seed = case_seed(cfg.seed, id);
    let root = StreamRng::new(seed);
    let band = cfg.signal.band as i64;
    let family = random_family(&mut root.stream(0), -band, band, &cfg.family, cfg.period)?;
    let spectra = random_spectra(&mut root.stream(1), cfg.n, cfg.period, cfg.signal.band, cfg.signal.decay, cfg.lattice.d)?;
    Ok(Case { id, seed, family, spectra })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: usize,
    pub seed: u64,
    #[serde(with = "exponent")]
    pub p: f64,
    pub d: usize,
    #[serde(with = "exponent")]
    pub r: f64,
    pub intervals: usize,
    pub ratio: f64,
    /// Ratio before greedy refinement.
    pub initial_ratio: f64,
    pub rad_ratio: Option<f64>,
    pub rad_stderr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub cases: Vec<CaseRecord>,
    pub max: f64,
    pub argmax: Option<usize>,
    pub argmax_seed: Option<u64>,
    #[serde(skip)]
    pub runtime: Duration,
}

impl RatioReport {
    pub fn from_cases(cases: Vec<CaseRecord>) -> Self {
        let mut best: Option<&CaseRecord> = None;
        for c in &cases {
            if best.is_none_or(|b| c.ratio > b.ratio) {
                best = Some(c);
            }
        }
        Self {
            max: best.map_or(0.0, |b| b.ratio),
            argmax: best.map(|b| b.case_id),
            argmax_seed: best.map(|b| b.seed),
            cases,
            runtime: Duration::ZERO,
        }
    }

    /// Report over the union of both corpora.
    pub fn merge(&self, other: &RatioReport) -> RatioReport {
        let mut cases = self.cases.clone();
        cases.extend(other.cases.iter().cloned());
        let mut r = RatioReport::from_cases(cases);
        r.runtime = self.runtime + other.runtime;
        r
    }

    /// `(family size, max ratio)` pairs sorted by size.
    pub fn size_curve(&self) -> Vec<(usize, f64)> {
        let mut m = std::collections::BTreeMap::new();
        for c in &self.cases {
            let e = m.entry(c.intervals).or_insert(0.0f64);
            *e = e.max(c.ratio);
        }
        m.into_iter().collect()
    }
}

/// Perturb-and-keep-if-larger search on the spectral coefficients.
fn refine(cfg: &ExperimentConfig, case: &Case, start: f64) -> Result<(Vec<Spectrum>, f64)> {
    let mut rng = StreamRng::new(case.seed).stream(2);
    let mut best = case.spectra.clone();
    let mut best_ratio = start;
    let b = cfg.signal.band as i64;
    let n = cfg.n;
    for _ in 0..cfg.refine_rounds {
        let eta: f64 = 0.5 * rng.random::<f64>();
        let mut trial = Vec::with_capacity(best.len());
        for s in &best {
            let rms = (s.energy() / (2 * b) as f64).sqrt().max(f64::MIN_POSITIVE);
            let mut c = s.coeffs().to_vec();
            for k in -b..b {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                c[slot_of(k, n)] += Complex64::new(re, im) * (eta * rms);
            }
            trial.push(Spectrum::new(c, s.period().clone())?);
        }
        let r = square_ratio_from_spectra(&trial, cfg.lattice, &case.family, cfg.p);
        if r > best_ratio {
            best_ratio = r;
            best = trial;
        }
    }
    Ok((best, best_ratio))
}

/// One corpus case: ratio, refinement and optional Rademacher ratio.
pub fn run_case(cfg: &ExperimentConfig, id: usize) -> Result<CaseRecord> {
    let case = generate_case(cfg, id)?;
    let initial = square_ratio_from_spectra(&case.spectra, cfg.lattice, &case.family, cfg.p);
    let (spectra, ratio) = refine(cfg, &case, initial)?;
    let rad = match cfg.rad_mode {
        Some(mode) => Some(rad_ratio_from_spectra(
            &spectra,
            cfg.lattice,
            &case.family,
            cfg.p,
            &cfg.sign_source(case.seed),
            mode,
        )?),
        None => None,
    };
    Ok(CaseRecord {
        case_id: id,
        seed: case.seed,
        p: cfg.p,
        d: cfg.lattice.d,
        r: cfg.lattice.r,
        intervals: case.family.len(),
        ratio,
        initial_ratio: initial,
        rad_ratio: rad.as_ref().map(|r| r.value),
        rad_stderr: rad.as_ref().map(|r| r.stderr),
    })
}

/// Corpus maximum of the square-function ratio over `cfg.cases` cases.
pub fn estimate_constant(cfg: &ExperimentConfig) -> Result<RatioReport> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let cases = (0..cfg.cases)
        .into_par_iter()
        .map(|i| run_case(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let mut report = RatioReport::from_cases(cases);
    report.runtime = start.elapsed();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_adapted_bump;

    fn scalar_of(g: GridSignal) -> LatticeSignal {
        LatticeSignal::from_scalar(&g)
    }

    fn random_signal(seed: u64, n: usize, band: usize, d: usize, r: f64) -> LatticeSignal {
        let spectra = random_spectra(&mut StreamRng::new(seed), n, 1, band, 0.5, d).unwrap();
        assemble(LatticeSpec::new(d, r).unwrap(), spectra.iter().map(|s| s.to_signal()).collect())
    }

    #[test]
    fn square_ratio_examples() {
        let f = random_signal(3, 64, 32, 2, 2.0);
        let cover = DisjointFamily::new(vec![bin_interval(-32, 10, 1), bin_interval(-22, 40, 1), bin_interval(18, 14, 1)]).unwrap();
        assert!((lpr_square_ratio(&f, &cover, 2.0).unwrap() - 1.0).abs() < 1e-12);
        let partial = DisjointFamily::new(vec![bin_interval(-5, 10, 1)]).unwrap();
        assert!(lpr_square_ratio(&f, &partial, 2.0).unwrap() <= 1.0 + 1e-12);

        let delta = scalar_of(GridSignal::impulse(8, int(8)).unwrap());
        let singles = DisjointFamily::new((-4..4).map(|k| bin_interval(k, 1, 8)).collect()).unwrap();
        let r = lpr_square_ratio(&delta, &singles, 4.0).unwrap();
        assert!((r - 8f64.powf(-0.25)).abs() < 1e-14, "{r}");

        let zero = LatticeSignal::zeros(LatticeSpec::scalar(), int(1), 16).unwrap();
        assert_eq!(lpr_square_ratio(&zero, &singles, 4.0).unwrap(), 0.0);
        assert!(lpr_square_ratio(&f, &cover, 1.5).is_err());
    }

    #[test]
    fn rad_ratio_examples() {
        let f = random_signal(5, 64, 32, 1, 2.0);
        let all = DisjointFamily::new(vec![bin_interval(-32, 64, 1)]).unwrap();
        let src = SignSource::new(1, 128);
        let r = lpr_rad_ratio(&f, &all, 4.0, &src, RadMode::Direct).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);

        let fam = DisjointFamily::new(vec![bin_interval(-30, 7, 1), bin_interval(-3, 9, 1), bin_interval(20, 5, 1)]).unwrap();
        let rad = lpr_rad_ratio(&f, &fam, 2.0, &src, RadMode::Direct).unwrap();
        let sq = lpr_square_ratio(&f, &fam, 2.0).unwrap();
        assert!((rad.value - sq).abs() < 1e-12);

        let dy = lpr_rad_ratio(&f, &fam, 4.0, &src, RadMode::Dyadic).unwrap();
        assert_eq!(dy.estimates.len(), 2);
        assert!(dy.value > 0.0);
        let short = DisjointFamily::new(vec![bin_interval(0, 3, 1)]).unwrap();
        assert!(matches!(
            lpr_rad_ratio(&f, &short, 4.0, &src, RadMode::Dyadic),
            Err(crate::Error::Precondition(_))
        ));
    }

    #[test]
    fn reproducing_identity_in_ratio() {
        let bump = make_adapted_bump().unwrap();
        let f = random_signal(9, 128, 64, 2, 2.5);
        let fam = DisjointFamily::new(vec![bin_interval(-40, 12, 1), bin_interval(-10, 6, 1), bin_interval(30, 20, 1)]).unwrap();
        for iv in fam.intervals() {
            let sharp = sharp_project_lattice(&f, iv);
            let both = smooth_project_lattice(&sharp, iv, &bump);
            let diff = both.values().iter().zip(sharp.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "{diff}");
        }
    }

    #[test]
    fn refining_a_family_keeps_l2_mass() {
        let f = random_signal(21, 64, 32, 1, 2.0);
        let coarse = DisjointFamily::new(vec![bin_interval(-10, 12, 1), bin_interval(5, 8, 1)]).unwrap();
        let fine = DisjointFamily::new(vec![bin_interval(-10, 5, 1), bin_interval(-5, 7, 1), bin_interval(5, 8, 1)]).unwrap();
        let a = lpr_square_ratio(&f, &coarse, 2.0).unwrap();
        let b = lpr_square_ratio(&f, &fine, 2.0).unwrap();
        assert!(b >= a - 1e-12 && (a - b).abs() < 1e-12);
    }

    #[test]
    fn domination_examples() {
        let bump = make_adapted_bump().unwrap();
        let f = random_signal(4, 64, 16, 1, 2.0);
        let one = DisjointFamily::new(vec![bin_interval(-4, 9, 1)]).unwrap();
        let rep = g_domination_report(&f, &one, &bump).unwrap();
        let smooth = smooth_project_lattice(&f, &one.intervals()[0], &bump);
        for (g, s) in rep.g.values().iter().zip(smooth.values()) {
            assert!((g.re - s.norm()).abs() < 1e-12);
        }
        assert_eq!(rep.degree, 0);

        let zero = LatticeSignal::zeros(LatticeSpec::scalar(), int(1), 64).unwrap();
        let rep = g_domination_report(&zero, &one, &bump).unwrap();
        assert_eq!(rep.dom_ratio, 0.0);
        assert!(rep.g.values().iter().all(|v| v.norm() == 0.0));
    }

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            n: 128,
            cases: 6,
            refine_rounds: 5,
            signal: SignalParams { band: 32, decay: 0.0 },
            family: FamilyParams {
                max_intervals: 4,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn estimate_constant_contracts() {
        let mut cfg = small_cfg();
        cfg.p = 2.0;
        let rep = estimate_constant(&cfg).unwrap();
        assert!(rep.max <= 1.0 + 1e-10);
        assert!(rep.cases.iter().all(|c| c.ratio <= rep.max));

        cfg.family = FamilyParams {
            min_intervals: 1,
            max_intervals: 1,
            covering: true,
            ..Default::default()
        };
        let rep = estimate_constant(&cfg).unwrap();
        assert!((rep.max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corpus_union_and_replay() {
        let cfg = small_cfg();
        let a = estimate_constant(&cfg).unwrap();
        let b = estimate_constant(&ExperimentConfig { seed: 77, ..cfg.clone() }).unwrap();
        assert_eq!(a.merge(&b).max, a.max.max(b.max));
        let id = a.argmax.unwrap();
        assert_eq!(run_case(&cfg, id).unwrap().ratio, a.max);
        assert!(a.cases.iter().all(|c| c.ratio >= c.initial_ratio));
    }

    #[test]
    fn config_round_trip() {
        let mut cfg = small_cfg();
        cfg.lattice = LatticeSpec::new(3, f64::INFINITY).unwrap();
        cfg.rad_mode = Some(RadMode::Dyadic);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"n": 256, "p": 3}"#).unwrap();
        assert_eq!(partial.n, 256);
        assert_eq!(partial.refine_rounds, 100);
    }
}
