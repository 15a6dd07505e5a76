//! Python bindings: intervals, decompositions, the adapted bump, the ratio
//! estimators and the batch runner.

use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use lprkit::experiments::{lpr_rad_ratio, lpr_square_ratio, RadMode};
use lprkit::interval::{self as iv, DisjointFamily, Rational};
use lprkit::kernel::dirichlet_gap_ratio as gap_ratio;
use lprkit::lattice::{LatticeSignal, LatticeSpec};
use lprkit::maximal::maximal_norm_report_values;
use lprkit::rademacher::{rad_norm_vectors, SignSource};
use lprkit::spectral::{make_adapted_bump, AdaptedBump, GridSignal};
use lprkit_cli::{CliError, ExperimentId, RunManifest};

fn core_err(e: lprkit::Error) -> PyErr {
    match e {
        lprkit::Error::Numerical(m) => PyArithmeticError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn cli_err(e: CliError) -> PyErr {
    match e {
        CliError::Validation(m) => PyValueError::new_err(m),
        CliError::Numerical(m) => PyArithmeticError::new_err(m),
        CliError::Io(m) => PyOSError::new_err(m),
    }
}

/// Accepts `int`, `fractions.Fraction` or strings such as `"3/8"`.
fn rational(x: &Bound<'_, PyAny>) -> PyResult<Rational> {
    let s = x.str()?.to_string();
    s.trim()
        .parse::<Rational>()
        .map_err(|_| PyValueError::new_err(format!("not an exact rational: {s}")))
}

fn fraction<'py>(py: Python<'py>, x: &Rational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((x.to_string(),))
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// A half-open interval `(a, b]` with exact rational endpoints.
#[pyclass(name = "Interval", frozen, eq, hash, from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyInterval(iv::Interval);

#[pymethods]
impl PyInterval {
    #[new]
    fn new(a: &Bound<'_, PyAny>, b: &Bound<'_, PyAny>) -> PyResult<Self> {
        iv::Interval::new(rational(a)?, rational(b)?).map(Self).map_err(core_err)
    }

    #[getter]
    fn left<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, self.0.left())
    }

    #[getter]
    fn right<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, self.0.right())
    }

    fn length<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, &self.0.length())
    }

    fn centre<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, &self.0.centre())
    }

    fn doubled(&self) -> Self {
        Self(self.0.doubled())
    }

    fn contains(&self, x: &Bound<'_, PyAny>) -> PyResult<bool> {
        Ok(self.0.contains(&rational(x)?))
    }

    fn intersects(&self, other: &PyInterval) -> bool {
        self.0.intersects(&other.0)
    }

    fn __repr__(&self) -> String {
        format!("Interval{}", self.0)
    }
}

fn family(intervals: Vec<PyInterval>) -> PyResult<DisjointFamily> {
    DisjointFamily::new(intervals.into_iter().map(|i| i.0).collect()).map_err(core_err)
}

/// Dyadic decomposition of a disjoint family, as nested dicts.
#[pyfunction]
fn decompose(py: Python<'_>, intervals: Vec<PyInterval>) -> PyResult<Py<PyAny>> {
    let dec = iv::dyadic_decompose(&family(intervals)?).map_err(core_err)?;
    to_py(py, &dec)
}

/// Largest number of other doubled intervals meeting one doubled interval.
#[pyfunction]
fn degree(intervals: Vec<PyInterval>) -> usize {
    let ivs: Vec<iv::Interval> = intervals.into_iter().map(|i| i.0).collect();
    iv::well_distributed_degree(&ivs)
}

/// The adapted bump `ψ`, evaluated in frequency and in space.
#[pyclass(name = "Bump", frozen)]
struct PyBump(Arc<AdaptedBump>);

#[pymethods]
impl PyBump {
    #[new]
    fn new() -> PyResult<Self> {
        make_adapted_bump().map(Self).map_err(core_err)
    }

    fn fourier(&self, xi: f64) -> f64 {
        self.0.fourier(xi)
    }

    fn spatial(&self, x: f64) -> f64 {
        self.0.spatial(x)
    }

    fn decay_constant(&self) -> f64 {
        self.0.decay_constant()
    }
}

fn grid(samples: Vec<Complex64>, period: i64) -> PyResult<GridSignal> {
    GridSignal::new(samples, iv::int(period)).map_err(core_err)
}

/// Samples of `P_I f` for `f` sampled at `N` points of a period-`L` grid.
#[pyfunction]
fn sharp_project(samples: Vec<Complex64>, period: i64, interval: PyInterval) -> PyResult<Vec<Complex64>> {
    Ok(lprkit::spectral::sharp_project(&grid(samples, period)?, &interval.0).into_samples())
}

#[pyfunction]
fn smooth_project(samples: Vec<Complex64>, period: i64, interval: PyInterval, bump: &PyBump) -> PyResult<Vec<Complex64>> {
    Ok(lprkit::spectral::smooth_project(&grid(samples, period)?, &interval.0, &bump.0).into_samples())
}

fn lattice_signal(rows: Vec<Vec<Complex64>>, period: i64, r: f64) -> PyResult<LatticeSignal> {
    let d = rows.first().map_or(1, Vec::len);
    if rows.iter().any(|row| row.len() != d) {
        return Err(PyValueError::new_err("rows must all have the same width"));
    }
    let spec = LatticeSpec::new(d, r).map_err(core_err)?;
    LatticeSignal::new(spec, iv::int(period), rows.concat()).map_err(core_err)
}

/// `‖(Σ|P_I f|²)^{1/2}‖_p / ‖f‖_p` for `N × d` samples in `ℓ^r_d`.
#[pyfunction]
#[pyo3(signature = (rows, period, intervals, p, r = 2.0))]
fn square_ratio(rows: Vec<Vec<Complex64>>, period: i64, intervals: Vec<PyInterval>, p: f64, r: f64) -> PyResult<f64> {
    lpr_square_ratio(&lattice_signal(rows, period, r)?, &family(intervals)?, p).map_err(core_err)
}

/// Rademacher-average ratio; `mode` is `"direct"` or `"dyadic"`.
#[pyfunction]
#[pyo3(signature = (rows, period, intervals, p, r = 2.0, mode = "direct", seed = 0, trials = 512))]
#[allow(clippy::too_many_arguments)]
fn rad_ratio(
    py: Python<'_>,
    rows: Vec<Vec<Complex64>>,
    period: i64,
    intervals: Vec<PyInterval>,
    p: f64,
    r: f64,
    mode: &str,
    seed: u64,
    trials: usize,
) -> PyResult<Py<PyAny>> {
    let mode = match mode {
        "direct" => RadMode::Direct,
        "dyadic" => RadMode::Dyadic,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let f = lattice_signal(rows, period, r)?;
    let out = lpr_rad_ratio(&f, &family(intervals)?, p, &SignSource::new(seed, trials), mode).map_err(core_err)?;
    to_py(py, &out)
}

/// `(E‖Σ ε_j x_j‖^p)^{1/p}` in `ℓ^r_d`; exhaustive for up to 12 vectors.
#[pyfunction]
#[pyo3(signature = (vectors, p, r = 2.0, seed = 0, trials = 4096))]
fn rad_norm(py: Python<'_>, vectors: Vec<Vec<Complex64>>, p: f64, r: f64, seed: u64, trials: usize) -> PyResult<Py<PyAny>> {
    let d = vectors.first().map_or(1, Vec::len);
    let spec = LatticeSpec::new(d, r).map_err(core_err)?;
    let est = rad_norm_vectors(&vectors, spec, p, &SignSource::new(seed, trials)).map_err(core_err)?;
    to_py(py, &est)
}

#[pyfunction]
#[pyo3(signature = (rows, p, q = 2.0, r = 2.0))]
fn maximal_report(py: Python<'_>, rows: Vec<Vec<Complex64>>, p: f64, q: f64, r: f64) -> PyResult<Py<PyAny>> {
    let f = lattice_signal(rows, 1, r)?;
    let rep = maximal_norm_report_values(f.values(), f.spec(), p, q).map_err(core_err)?;
    to_py(py, &rep)
}

/// `∫_I |Σ α_j e(γ_j t)|² dt / (|I| Σ|α_j|²)`.
#[pyfunction]
fn dirichlet_gap_ratio(gamma: Vec<f64>, alpha: Vec<Complex64>, interval: PyInterval) -> PyResult<f64> {
    gap_ratio(&gamma, &alpha, &interval.0).map_err(core_err)
}

/// Runs one experiment and returns its summary; `config` is a dict.
#[pyfunction]
#[pyo3(signature = (experiment, out, config = None, seed = None, jobs = 1))]
fn run_experiment(
    py: Python<'_>,
    experiment: &str,
    out: PathBuf,
    config: Option<Bound<'_, PyAny>>,
    seed: Option<u64>,
    jobs: usize,
) -> PyResult<Py<PyAny>> {
    let id: ExperimentId = experiment.parse().map_err(cli_err)?;
    let config = match config {
        Some(c) => {
            let text: String = py.import("json")?.call_method1("dumps", (c,))?.extract()?;
            let path = out.with_extension("config.json");
            std::fs::write(&path, text).map_err(|e| PyOSError::new_err(e.to_string()))?;
            Some(path)
        }
        None => None,
    };
    let m = RunManifest {
        experiment: id,
        config,
        out: out.clone(),
        seed,
        jobs,
    };
    py.detach(|| lprkit_cli::run_experiment(&m)).map_err(cli_err)?;
    let text = std::fs::read_to_string(out.join("summary.json")).map_err(|e| PyOSError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Recomputes one recorded case of a finished run.
#[pyfunction]
#[pyo3(signature = (out, case, jobs = 1))]
fn replay(py: Python<'_>, out: PathBuf, case: usize, jobs: usize) -> PyResult<Py<PyAny>> {
    let outcome = py.detach(|| lprkit_cli::replay(&out, case, jobs)).map_err(cli_err)?;
    to_py(py, &outcome)
}

#[pymodule]
fn lprkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInterval>()?;
    m.add_class::<PyBump>()?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(degree, m)?)?;
    m.add_function(wrap_pyfunction!(sharp_project, m)?)?;
    m.add_function(wrap_pyfunction!(smooth_project, m)?)?;
    m.add_function(wrap_pyfunction!(square_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(rad_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(rad_norm, m)?)?;
    m.add_function(wrap_pyfunction!(maximal_report, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_gap_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    Ok(())
}
