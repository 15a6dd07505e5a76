//! Experiment identifiers and their configuration documents.
//!
//! Every config is a JSON object; missing fields take the defaults below and
//! unknown fields are rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use lprkit::corpus::standard_kernel_family;
use lprkit::experiments::{ExperimentConfig, FamilyParams, RadMode, SignalParams};
use lprkit::fixtures;
use lprkit::interval::{DisjointFamily, Interval};
use lprkit::lattice::{exponent, LatticeSpec};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    Decompose,
    Degree,
    LprSquare,
    LprRad,
    Domination,
    KernelDecay,
    DirichletGap,
    Maximal,
    Bmo,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 9] = [
        ExperimentId::Decompose,
        ExperimentId::Degree,
        ExperimentId::LprSquare,
        ExperimentId::LprRad,
        ExperimentId::Domination,
        ExperimentId::KernelDecay,
        ExperimentId::DirichletGap,
        ExperimentId::Maximal,
        ExperimentId::Bmo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Decompose => "decompose",
            ExperimentId::Degree => "degree",
            ExperimentId::LprSquare => "lpr-square",
            ExperimentId::LprRad => "lpr-rad",
            ExperimentId::Domination => "domination",
            ExperimentId::KernelDecay => "kernel-decay",
            ExperimentId::DirichletGap => "dirichlet-gap",
            ExperimentId::Maximal => "maximal",
            ExperimentId::Bmo => "bmo",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        ExperimentId::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| {
            let known: Vec<&str> = ExperimentId::ALL.iter().map(|e| e.as_str()).collect();
            CliError::Validation(format!("unknown experiment {s:?}; expected one of {}", known.join(", ")))
        })
    }
}

/// Fixed families and/or `random_cases` seeded random ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeConfig {
    pub families: Vec<DisjointFamily>,
    pub random_cases: usize,
    pub seed: u64,
    /// Dilate each family to minimum length 4 first.
    pub normalize: bool,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            families: Vec::new(),
            random_cases: 0,
            seed: 0,
            normalize: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegreeConfig {
    pub cases: usize,
    pub seed: u64,
}

impl Default for DegreeConfig {
    fn default() -> Self {
        Self {
            cases: fixtures::DECOMPOSITION_CASES,
            seed: fixtures::DECOMPOSITION_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DominationConfig {
    pub n: usize,
    pub period: i64,
    pub lattice: LatticeSpec,
    pub family: FamilyParams,
    pub signal: SignalParams,
    pub cases: usize,
    pub seed: u64,
}

impl Default for DominationConfig {
    fn default() -> Self {
        let c = lprkit::corpus::domination_config(1024, fixtures::DOMINATION_SEED);
        Self {
            n: c.n,
            period: c.period,
            lattice: c.lattice,
            family: c.family,
            signal: c.signal,
            cases: c.cases,
            seed: c.seed,
        }
    }
}

impl DominationConfig {
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            n: self.n,
            period: self.period,
            p: 2.0,
            lattice: self.lattice,
            family: self.family.clone(),
            signal: self.signal.clone(),
            cases: self.cases,
            seed: self.seed,
            refine_rounds: 0,
            ..ExperimentConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelDecayConfig {
    pub family: DisjointFamily,
    pub x: f64,
    pub z: f64,
    pub m_min: u32,
    pub m_max: u32,
    /// Random `λ` arrays per shell.
    pub samples: usize,
    pub seed: u64,
    /// `X`; the dual `X*` carries `λ`.
    pub lattice: LatticeSpec,
}

impl Default for KernelDecayConfig {
    fn default() -> Self {
        Self {
            family: standard_kernel_family(),
            x: fixtures::DECAY_X,
            z: fixtures::DECAY_Z,
            m_min: 1,
            m_max: 8,
            samples: fixtures::DECAY_SAMPLES,
            seed: fixtures::DECAY_SEED,
            lattice: LatticeSpec::scalar(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DirichletConfig {
    pub cases: usize,
    pub seed: u64,
}

impl Default for DirichletConfig {
    fn default() -> Self {
        Self {
            cases: fixtures::DIRICHLET_CASES,
            seed: fixtures::DIRICHLET_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaximalConfig {
    pub n: usize,
    pub lattice: LatticeSpec,
    /// Signal band in bins; 0 means `n / 8`.
    pub band: usize,
    pub cases: usize,
    pub seed: u64,
    #[serde(with = "exponent_list")]
    pub p: Vec<f64>,
    pub q: f64,
}

impl Default for MaximalConfig {
    fn default() -> Self {
        Self {
            n: 1024,
            lattice: LatticeSpec::scalar(),
            band: 0,
            cases: 100,
            seed: fixtures::MAXIMAL_SEED,
            p: vec![2.0, 4.0, 8.0],
            q: 2.0,
        }
    }
}

impl MaximalConfig {
    pub fn band(&self) -> usize {
        if self.band == 0 {
            (self.n / 8).max(1)
        } else {
            self.band
        }
    }
}

mod exponent_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "exponent")] f64);

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&p| Wrap(p)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Wrap>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BmoConfig {
    pub family: DisjointFamily,
    pub interval: Interval,
    pub lattice: LatticeSpec,
    pub period: i64,
    pub n: usize,
    /// Left end of the sampling grid.
    pub origin: f64,
    /// `f` equals `value` on `(window[0], window[1]]` and vanishes elsewhere.
    pub window: [f64; 2],
    pub value: Vec<f64>,
    pub seed: u64,
}

impl Default for BmoConfig {
    fn default() -> Self {
        Self {
            family: standard_kernel_family(),
            interval: Interval::from_ints(0, 4).expect("fixed interval"),
            lattice: LatticeSpec::scalar(),
            period: 256,
            n: 16384,
            origin: -128.0,
            window: [-64.0, 64.0],
            value: vec![1.0],
            seed: fixtures::BMO_SEED,
        }
    }
}

/// A parsed config for one experiment.
#[derive(Clone, Debug, PartialEq)]
pub enum Config {
    Decompose(DecomposeConfig),
    Degree(DegreeConfig),
    LprSquare(ExperimentConfig),
    LprRad(ExperimentConfig),
    Domination(DominationConfig),
    KernelDecay(KernelDecayConfig),
    DirichletGap(DirichletConfig),
    Maximal(MaximalConfig),
    Bmo(BmoConfig),
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
}

impl Config {
    /// Parses `text` (empty means all defaults) for `id`.
    pub fn parse(id: ExperimentId, text: &str) -> CliResult<Config> {
        let text = if text.trim().is_empty() { "{}" } else { text };
        let cfg = match id {
            ExperimentId::Decompose => Config::Decompose(parse(text)?),
            ExperimentId::Degree => Config::Degree(parse(text)?),
            ExperimentId::LprSquare => Config::LprSquare(parse(text)?),
            ExperimentId::LprRad => {
                let mut c: ExperimentConfig = parse(text)?;
                c.rad_mode.get_or_insert(RadMode::Direct);
                Config::LprRad(c)
            }
            ExperimentId::Domination => Config::Domination(parse(text)?),
            ExperimentId::KernelDecay => Config::KernelDecay(parse(text)?),
            ExperimentId::DirichletGap => Config::DirichletGap(parse(text)?),
            ExperimentId::Maximal => Config::Maximal(parse(text)?),
            ExperimentId::Bmo => Config::Bmo(parse(text)?),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn id(&self) -> ExperimentId {
        match self {
            Config::Decompose(_) => ExperimentId::Decompose,
            Config::Degree(_) => ExperimentId::Degree,
            Config::LprSquare(_) => ExperimentId::LprSquare,
            Config::LprRad(_) => ExperimentId::LprRad,
            Config::Domination(_) => ExperimentId::Domination,
            Config::KernelDecay(_) => ExperimentId::KernelDecay,
            Config::DirichletGap(_) => ExperimentId::DirichletGap,
            Config::Maximal(_) => ExperimentId::Maximal,
            Config::Bmo(_) => ExperimentId::Bmo,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Config::Decompose(c) => c.seed,
            Config::Degree(c) => c.seed,
            Config::LprSquare(c) | Config::LprRad(c) => c.seed,
            Config::Domination(c) => c.seed,
            Config::KernelDecay(c) => c.seed,
            Config::DirichletGap(c) => c.seed,
            Config::Maximal(c) => c.seed,
            Config::Bmo(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Config::Decompose(c) => c.seed = seed,
            Config::Degree(c) => c.seed = seed,
            Config::LprSquare(c) | Config::LprRad(c) => c.seed = seed,
            Config::Domination(c) => c.seed = seed,
            Config::KernelDecay(c) => c.seed = seed,
            Config::DirichletGap(c) => c.seed = seed,
            Config::Maximal(c) => c.seed = seed,
            Config::Bmo(c) => c.seed = seed,
        }
    }

    /// The config as a JSON value; [`Config::parse`] inverts it.
    pub fn echo(&self) -> serde_json::Value {
        let v = match self {
            Config::Decompose(c) => serde_json::to_value(c),
            Config::Degree(c) => serde_json::to_value(c),
            Config::LprSquare(c) | Config::LprRad(c) => serde_json::to_value(c),
            Config::Domination(c) => serde_json::to_value(c),
            Config::KernelDecay(c) => serde_json::to_value(c),
            Config::DirichletGap(c) => serde_json::to_value(c),
            Config::Maximal(c) => serde_json::to_value(c),
            Config::Bmo(c) => serde_json::to_value(c),
        };
        v.expect("configs serialize")
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Validation(m));
        match self {
            Config::Decompose(_) | Config::Degree(_) | Config::DirichletGap(_) => Ok(()),
            Config::LprSquare(c) | Config::LprRad(c) => Ok(c.validate()?),
            Config::Domination(c) => Ok(c.experiment().validate()?),
            Config::KernelDecay(c) => {
                if !(1 <= c.m_min && c.m_min <= c.m_max && c.m_max <= 12) {
                    return bad(format!("shell range {}..={} must lie in 1..=12", c.m_min, c.m_max));
                }
                if c.x == c.z || !c.x.is_finite() || !c.z.is_finite() {
                    return bad("kernel-decay needs finite x ≠ z".into());
                }
                if c.family.is_empty() {
                    return bad("kernel-decay needs a nonempty family".into());
                }
                LatticeSpec::new(c.lattice.d, c.lattice.r)?;
                if !c.lattice.is_two_convex() {
                    return bad(format!("lattice exponent {} must be at least 2", c.lattice.r));
                }
                Ok(())
            }
            Config::Maximal(c) => {
                if c.n < 2 || !c.n.is_power_of_two() {
                    return bad(format!("grid size {} must be a power of two", c.n));
                }
                if c.band() > c.n / 2 {
                    return bad(format!("band {} exceeds n/2", c.band()));
                }
                if c.p.is_empty() || c.p.iter().any(|p| !(*p >= 1.0)) {
                    return bad("exponents p must lie in [1, ∞]".into());
                }
                if !(c.q >= 1.0 && c.q.is_finite()) {
                    return bad(format!("maximal exponent q = {} must lie in [1, ∞)", c.q));
                }
                LatticeSpec::new(c.lattice.d, c.lattice.r)?;
                Ok(())
            }
            Config::Bmo(c) => {
                if c.value.len() != c.lattice.d {
                    return bad(format!("value has {} entries for d = {}", c.value.len(), c.lattice.d));
                }
                if c.period < 1 || c.n < 2 || !c.n.is_power_of_two() {
                    return bad("bmo grid needs period ≥ 1 and a power-of-two n".into());
                }
                if !(c.window[0] < c.window[1]) || !c.origin.is_finite() {
                    return bad("bmo window must be a nonempty finite interval".into());
                }
                LatticeSpec::new(c.lattice.d, c.lattice.r)?;
                Ok(())
            }
        }
    }
}
