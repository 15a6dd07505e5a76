//! Experiment dispatch, report files and replay.
//!
//! A run directory holds `summary.json` (schema version, experiment, master
//! seed, config echo, results), `cases.csv` and, for ratio-vs-size and
//! decay experiments, `plot.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use lprkit::corpus::{decomposition_family, dirichlet_instance, mean_zero_signal, window_signal};
use lprkit::experiments::{estimate_constant, g_domination_report, generate_case, run_case, CaseRecord, ExperimentConfig};
use lprkit::interval::{dyadic_decompose, normalize_family, split_mod3, well_distributed_degree, Side};
use lprkit::kernel::{bmo_oscillation_report, decay_fit, dirichlet_gap_ratio, KernelSpec};
use lprkit::maximal::maximal_norm_report;
use lprkit::rademacher::SignSource;
use lprkit::spectral::make_adapted_bump;

use crate::config::{Config, ExperimentId};
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_FILE: &str = "summary.json";
pub const CASES_FILE: &str = "cases.csv";
pub const PLOT_FILE: &str = "plot.csv";
pub const REPLAY_FILE: &str = "replay.json";
/// Largest accepted difference between a replayed and a recorded ratio.
pub const REPLAY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub experiment: ExperimentId,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    /// Overrides the config's seed when set.
    pub seed: Option<u64>,
    pub jobs: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub results: Value,
    pub cases: Table,
    pub plot: Option<Table>,
}

/// Shortest round-trip text for floats.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// Runs `cfg` on the current rayon pool.
pub fn execute(cfg: &Config) -> CliResult<RunOutput> {
    match cfg {
        Config::Decompose(c) => {
            let mut fams: Vec<(&str, lprkit::interval::DisjointFamily)> = c.families.iter().map(|f| ("given", f.clone())).collect();
            fams.extend((0..c.random_cases).map(|i| ("random", decomposition_family(c.seed, i))));
            let mut table = Table::new(&["case", "j", "side", "k", "left", "right"]);
            let mut records = Vec::with_capacity(fams.len());
            let mut total = 0;
            for (case, (origin, fam)) in fams.iter().enumerate() {
                let (scale, fam) = if c.normalize {
                    normalize_family(fam)?
                } else {
                    (lprkit::interval::int(1), fam.clone())
                };
                let dec = dyadic_decompose(&fam)?;
                let violations = dec.invariant_violations();
                total += violations.len();
                for (j, e) in dec.entries.iter().enumerate() {
                    for side in Side::BOTH {
                        for (k, p) in e.pieces(side).iter().enumerate() {
                            let (l, r) = p.as_ref().map_or(("empty".to_string(), "empty".to_string()), |p| (p.left().to_string(), p.right().to_string()));
                            let s = if side == Side::A { "a" } else { "b" };
                            table.push(vec![case.to_string(), j.to_string(), s.into(), (k + 1).to_string(), l, r]);
                        }
                    }
                }
                records.push(json!({
                    "case": case,
                    "origin": origin,
                    "scale": scale.to_string(),
                    "decomposition": dec,
                    "violations": violations,
                }));
            }
            Ok(RunOutput {
                results: json!({ "families": records, "total_violations": total }),
                cases: table,
                plot: None,
            })
        }
        Config::Degree(c) => {
            let rows = (0..c.cases)
                .into_par_iter()
                .map(|i| -> CliResult<_> {
                    let fam = decomposition_family(c.seed, i);
                    let dec = dyadic_decompose(&fam)?;
                    Ok((
                        fam.len(),
                        well_distributed_degree(&dec.side_family(Side::A)),
                        well_distributed_degree(&dec.side_family(Side::B)),
                        split_mod3(&dec, Side::A),
                        split_mod3(&dec, Side::B),
                        dec.invariant_violations().len(),
                    ))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let mut table = Table::new(&["case", "seed", "intervals", "degree_a", "degree_b", "mod3_a", "mod3_b", "violations"]);
            let mut failures = Vec::new();
            for (i, (len, da, db, ma, mb, v)) in rows.iter().enumerate() {
                if !(ma.all_disjoint() && mb.all_disjoint()) {
                    failures.push(json!({ "case": i, "a": ma.conflicts, "b": mb.conflicts }));
                }
                table.push(vec![
                    i.to_string(),
                    c.seed.to_string(),
                    len.to_string(),
                    da.to_string(),
                    db.to_string(),
                    ma.all_disjoint().to_string(),
                    mb.all_disjoint().to_string(),
                    v.to_string(),
                ]);
            }
            let max_degree = rows.iter().map(|r| r.1.max(r.2)).max().unwrap_or(0);
            let disjoint = rows.len() - failures.len();
            let fraction = if rows.is_empty() { 1.0 } else { disjoint as f64 / rows.len() as f64 };
            Ok(RunOutput {
                results: json!({
                    "cases": rows.len(),
                    "max_degree": max_degree,
                    "mod3_disjoint_fraction": fraction,
                    "mod3_failures": failures,
                    "total_violations": rows.iter().map(|r| r.5).sum::<usize>(),
                }),
                cases: table,
                plot: None,
            })
        }
        Config::LprSquare(c) => {
            let mut c = c.clone();
            c.rad_mode = None;
            let rep = estimate_constant(&c)?;
            let mut table = Table::new(&["case_id", "seed", "p", "d", "r", "intervals", "ratio", "initial_ratio"]);
            for r in &rep.cases {
                table.push(vec![
                    r.case_id.to_string(),
                    r.seed.to_string(),
                    num(r.p),
                    r.d.to_string(),
                    num(r.r),
                    r.intervals.to_string(),
                    num(r.ratio),
                    num(r.initial_ratio),
                ]);
            }
            Ok(RunOutput {
                results: json!({
                    "cases": rep.cases.len(),
                    "max": rep.max,
                    "argmax": rep.argmax,
                    "argmax_seed": rep.argmax_seed,
                }),
                cases: table,
                plot: Some(size_plot(rep.size_curve())),
            })
        }
        Config::LprRad(c) => {
            c.validate()?;
            let recs = (0..c.cases).into_par_iter().map(|i| run_case(c, i)).collect::<lprkit::Result<Vec<CaseRecord>>>()?;
            let mut table = Table::new(&["case_id", "seed", "p", "d", "r", "intervals", "square_ratio", "ratio", "stderr"]);
            let mut best: Option<&CaseRecord> = None;
            let mut curve = BTreeMap::new();
            for r in &recs {
                let v = r.rad_ratio.unwrap_or(0.0);
                if best.is_none_or(|b| v > b.rad_ratio.unwrap_or(0.0)) {
                    best = Some(r);
                }
                let e = curve.entry(r.intervals).or_insert(0.0f64);
                *e = e.max(v);
                table.push(vec![
                    r.case_id.to_string(),
                    r.seed.to_string(),
                    num(r.p),
                    r.d.to_string(),
                    num(r.r),
                    r.intervals.to_string(),
                    num(r.ratio),
                    opt(r.rad_ratio),
                    opt(r.rad_stderr),
                ]);
            }
            Ok(RunOutput {
                results: json!({
                    "cases": recs.len(),
                    "mode": c.rad_mode,
                    "max": best.and_then(|b| b.rad_ratio).unwrap_or(0.0),
                    "argmax": best.map(|b| b.case_id),
                    "argmax_seed": best.map(|b| b.seed),
                    "max_square_ratio": recs.iter().map(|r| r.ratio).fold(0.0, f64::max),
                }),
                cases: table,
                plot: Some(size_plot(curve.into_iter().collect())),
            })
        }
        Config::Domination(c) => {
            let ec = c.experiment();
            let bump = make_adapted_bump()?;
            let rows = (0..c.cases)
                .into_par_iter()
                .map(|i| -> CliResult<_> {
                    let case = generate_case(&ec, i)?;
                    let r = g_domination_report(&case.signal(ec.lattice), &case.family, &bump)?;
                    Ok((case.seed, case.family.len(), r.degree, r.dom_ratio))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let mut table = Table::new(&["case_id", "seed", "intervals", "degree", "ratio"]);
            let mut curve = BTreeMap::new();
            let mut best: Option<usize> = None;
            for (i, (seed, len, deg, ratio)) in rows.iter().enumerate() {
                if best.is_none_or(|b| *ratio > rows[b].3) {
                    best = Some(i);
                }
                let e = curve.entry(*len).or_insert(0.0f64);
                *e = e.max(*ratio);
                table.push(vec![i.to_string(), seed.to_string(), len.to_string(), deg.to_string(), num(*ratio)]);
            }
            Ok(RunOutput {
                results: json!({
                    "cases": rows.len(),
                    "max": best.map_or(0.0, |b| rows[b].3),
                    "argmax": best,
                    "argmax_seed": best.map(|b| rows[b].0),
                    "max_degree": rows.iter().map(|r| r.2).max().unwrap_or(0),
                }),
                cases: table,
                plot: Some(size_plot(curve.into_iter().collect())),
            })
        }
        Config::KernelDecay(c) => {
            let spec = KernelSpec::new(&c.family, make_adapted_bump()?)?;
            let gaps = spec.gap_violations();
            let mut table = Table::new(&["m", "A_m", "r_m", "slope"]);
            let mut plot = Table::new(&["m", "log2_A_m"]);
            if !gaps.is_empty() {
                return Ok(RunOutput {
                    results: json!({ "excluded": true, "gap_violations": gaps, "rows": [], "slope": null }),
                    cases: table,
                    plot: Some(plot),
                });
            }
            let ms: Vec<u32> = (c.m_min..=c.m_max).collect();
            let rep = decay_fit(&spec, c.lattice, c.x, c.z, &ms, c.samples, c.seed)?;
            for r in &rep.rows {
                table.push(vec![r.m.to_string(), num(r.a_m), num(r.r_m), opt(rep.slope)]);
                if r.a_m > 0.0 {
                    plot.push(vec![r.m.to_string(), num(r.a_m.log2())]);
                }
            }
            Ok(RunOutput {
                results: json!({
                    "excluded": false,
                    "gap_violations": gaps,
                    "rows": rep.rows,
                    "slope": rep.slope,
                    "max_r_m": rep.rows.iter().map(|r| r.r_m).fold(0.0, f64::max),
                    "lambda_samples": rep.lambda_samples,
                    "max_sum_mu_sq": rep.max_sum_mu_sq,
                    "x_max": rep.x_max,
                }),
                cases: table,
                plot: Some(plot),
            })
        }
        Config::DirichletGap(c) => {
            let rows = (0..c.cases)
                .into_par_iter()
                .map(|i| -> CliResult<_> {
                    let d = dirichlet_instance(c.seed, i);
                    let r = dirichlet_gap_ratio(&d.gamma, &d.alpha, &d.interval)?;
                    Ok((d.gamma.len(), lprkit::interval::to_f64(&d.interval.length()), r))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let mut table = Table::new(&["case_id", "seed", "terms", "length", "ratio"]);
            let mut curve = BTreeMap::new();
            let mut best: Option<usize> = None;
            for (i, (terms, len, r)) in rows.iter().enumerate() {
                if best.is_none_or(|b| *r > rows[b].2) {
                    best = Some(i);
                }
                let e = curve.entry(*terms).or_insert(0.0f64);
                *e = e.max(*r);
                table.push(vec![i.to_string(), c.seed.to_string(), terms.to_string(), num(*len), num(*r)]);
            }
            Ok(RunOutput {
                results: json!({
                    "cases": rows.len(),
                    "max": best.map_or(0.0, |b| rows[b].2),
                    "argmax": best,
                }),
                cases: table,
                plot: Some(size_plot(curve.into_iter().collect())),
            })
        }
        Config::Maximal(c) => {
            let rows = (0..c.cases)
                .into_par_iter()
                .map(|i| -> CliResult<Vec<_>> {
                    let f = mean_zero_signal(c.seed, i, c.n, c.lattice, c.band())?;
                    c.p.iter().map(|&p| Ok(maximal_norm_report(&f, p, c.q)?)).collect()
                })
                .collect::<CliResult<Vec<_>>>()?;
            let mut table = Table::new(&["case_id", "seed", "p", "q", "fs_ratio", "mq_bound", "concavification_gap"]);
            for (i, reps) in rows.iter().enumerate() {
                for r in reps {
                    table.push(vec![
                        i.to_string(),
                        c.seed.to_string(),
                        num(r.p),
                        num(r.q),
                        opt(r.fs_ratio),
                        opt(r.mq_bound),
                        opt(r.concavification_gap),
                    ]);
                }
            }
            let per_p: Vec<Value> = c
                .p
                .iter()
                .enumerate()
                .map(|(k, &p)| {
                    let col = |f: fn(&lprkit::maximal::MaximalReport) -> Option<f64>| -> Option<f64> {
                        rows.iter().filter_map(|r| f(&r[k])).reduce(f64::max)
                    };
                    json!({
                        "p": to_json(&ExponentValue(p)),
                        "max_fs_ratio": col(|r| r.fs_ratio),
                        "max_mq_bound": col(|r| r.mq_bound),
                        "max_concavification_gap": col(|r| r.concavification_gap),
                    })
                })
                .collect();
            Ok(RunOutput {
                results: json!({ "cases": rows.len(), "by_p": per_p }),
                cases: table,
                plot: None,
            })
        }
        Config::Bmo(c) => {
            let spec = KernelSpec::new(&c.family, make_adapted_bump()?)?;
            let value: Vec<Complex64> = c.value.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let f = window_signal(c.lattice, c.period, c.n, c.origin, c.window[0], c.window[1], &value)?;
            let rep = bmo_oscillation_report(&spec, &f, c.origin, &c.interval, &SignSource::new(c.seed, lprkit::kernel::BMO_TRIALS))?;
            let mut table = Table::new(&["interval", "seed", "A", "B"]);
            table.push(vec![rep.interval.to_string(), rep.seed.to_string(), num(rep.a), num(rep.b)]);
            Ok(RunOutput {
                results: json!({
                    "interval": rep.interval,
                    "A": rep.a,
                    "B": rep.b,
                    "seeds": [rep.seed],
                    "trials": rep.trials,
                    "exhaustive": rep.exhaustive,
                    "x_nodes": rep.x_nodes,
                }),
                cases: table,
                plot: None,
            })
        }
    }
}

#[derive(Serialize)]
struct ExponentValue(#[serde(with = "lprkit::lattice::exponent")] f64);

fn size_plot(curve: Vec<(usize, f64)>) -> Table {
    let mut t = Table::new(&["family_size", "max_ratio"]);
    for (s, r) in curve {
        t.push(vec![s.to_string(), num(r)]);
    }
    t
}

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))
}

fn write_json(path: &Path, v: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(v).expect("json values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn load_config(m: &RunManifest) -> CliResult<Config> {
    let text = match &m.config {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = Config::parse(m.experiment, &text)?;
    if let Some(s) = m.seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

/// Parses, runs and writes the report files of one manifest.
pub fn run_experiment(m: &RunManifest) -> CliResult<RunOutput> {
    let cfg = load_config(m)?;
    let out = pool(m.jobs)?.install(|| execute(&cfg))?;
    fs::create_dir_all(&m.out).map_err(|e| CliError::Io(format!("{}: {e}", m.out.display())))?;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.id().as_str(),
        "seed": cfg.seed(),
        "config": cfg.echo(),
        "results": out.results,
    });
    write_json(&m.out.join(SUMMARY_FILE), &summary)?;
    out.cases.write(&m.out.join(CASES_FILE))?;
    if let Some(p) = &out.plot {
        p.write(&m.out.join(PLOT_FILE))?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplayOutcome {
    pub schema_version: u32,
    pub experiment: String,
    pub case: usize,
    pub seed: u64,
    pub ratio: f64,
    pub recorded_ratio: f64,
    pub difference: f64,
}

fn replay_ratio(cfg: &Config, case: usize) -> CliResult<(u64, f64)> {
    let check = |cases: usize| {
        if case >= cases {
            Err(CliError::Validation(format!("case {case} is outside the corpus of {cases}")))
        } else {
            Ok(())
        }
    };
    match cfg {
        Config::LprSquare(c) | Config::LprRad(c) => {
            check(c.cases)?;
            let mut c: ExperimentConfig = c.clone();
            if matches!(cfg, Config::LprSquare(_)) {
                c.rad_mode = None;
            }
            let r = run_case(&c, case)?;
            Ok((r.seed, if c.rad_mode.is_some() { r.rad_ratio.unwrap_or(0.0) } else { r.ratio }))
        }
        Config::Domination(c) => {
            check(c.cases)?;
            let ec = c.experiment();
            let k = generate_case(&ec, case)?;
            let r = g_domination_report(&k.signal(ec.lattice), &k.family, &*make_adapted_bump()?)?;
            Ok((k.seed, r.dom_ratio))
        }
        Config::DirichletGap(c) => {
            check(c.cases)?;
            let d = dirichlet_instance(c.seed, case);
            Ok((c.seed, dirichlet_gap_ratio(&d.gamma, &d.alpha, &d.interval)?))
        }
        other => Err(CliError::Validation(format!("experiment {} has no replayable ratio cases", other.id()))),
    }
}

fn recorded_ratio(dir: &Path, case: usize) -> CliResult<f64> {
    let mut rdr = csv::Reader::from_path(dir.join(CASES_FILE))?;
    let headers = rdr.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == "ratio")
        .ok_or_else(|| CliError::Validation("cases.csv has no ratio column".into()))?;
    for rec in rdr.records() {
        let rec = rec?;
        if rec.get(0).and_then(|s| s.parse::<usize>().ok()) == Some(case) {
            return rec
                .get(col)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CliError::Validation(format!("case {case} has no numeric ratio")));
        }
    }
    Err(CliError::Validation(format!("case {case} is not recorded in {}", dir.display())))
}

/// Re-runs `case` of the run stored in `dir` and writes `replay.json`.
/// A mismatch beyond [`REPLAY_TOL`] is a numerical failure.
pub fn replay(dir: &Path, case: usize, jobs: usize) -> CliResult<ReplayOutcome> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let summary: Value = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let id: ExperimentId = summary["experiment"]
        .as_str()
        .ok_or_else(|| CliError::Validation("summary has no experiment id".into()))?
        .parse()?;
    let cfg = Config::parse(id, &summary["config"].to_string())?;
    let recorded = recorded_ratio(dir, case)?;
    let (seed, ratio) = pool(jobs)?.install(|| replay_ratio(&cfg, case))?;
    let outcome = ReplayOutcome {
        schema_version: SCHEMA_VERSION,
        experiment: id.as_str().into(),
        case,
        seed,
        ratio,
        recorded_ratio: recorded,
        difference: (ratio - recorded).abs(),
    };
    write_json(&dir.join(REPLAY_FILE), &to_json(&outcome))?;
    if outcome.difference > REPLAY_TOL {
        return Err(CliError::Numerical(format!(
            "case {case} replayed to {ratio:?}, recorded {recorded:?}"
        )));
    }
    Ok(outcome)
}
