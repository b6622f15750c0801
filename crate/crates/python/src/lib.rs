//! Python bindings. Tensors cross the boundary as `(shape, data)` pairs where
//! `data` is the flat slice-major, row-major-within-slice entry list.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use tubal_fgd::decomposition::{tubal_rank as rank_of, DEFAULT_RANK_TOL};
use tubal_fgd::experiments::{self, Command, ExperimentConfig};
use tubal_fgd::sensing::{empirical_rip_with_mode, MeasurementMode, ProblemParams};
use tubal_fgd::solver::{fgd_solve, EtaMode, FgdConfig, StopRule};
use tubal_fgd::{t_algebra, Error, Tensor3};

type Shape = (usize, usize, usize);
type PyTensor = (Shape, Vec<f64>);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    if e.is_validation() {
        PyValueError::new_err(msg)
    } else if e.is_numerical() {
        PyArithmeticError::new_err(msg)
    } else {
        PyRuntimeError::new_err(msg)
    }
}

fn tensor(shape: Shape, data: Vec<f64>) -> PyResult<Tensor3> {
    Tensor3::new(shape, data).map_err(to_py)
}

fn export(t: &Tensor3) -> PyTensor {
    (t.shape(), t.data().to_vec())
}

fn mode(name: &str) -> PyResult<MeasurementMode> {
    name.parse().map_err(to_py)
}

/// t-product `A * B`.
#[pyfunction]
fn t_product(a: PyTensor, b: PyTensor) -> PyResult<PyTensor> {
    let (a, b) = (tensor(a.0, a.1)?, tensor(b.0, b.1)?);
    Ok(export(&t_algebra::t_product(&a, &b).map_err(to_py)?))
}

#[pyfunction]
fn conj_transpose(a: PyTensor) -> PyResult<PyTensor> {
    Ok(export(&t_algebra::conj_transpose(&tensor(a.0, a.1)?)))
}

#[pyfunction]
#[pyo3(signature = (a, tol = DEFAULT_RANK_TOL))]
fn tubal_rank(a: PyTensor, tol: f64) -> PyResult<usize> {
    rank_of(&tensor(a.0, a.1)?, tol).map_err(to_py)
}

/// Synthetic instance as a dict with `x_star`, `f_star`, `y`, `noise` and
/// the spectrum statistics.
#[pyfunction]
#[pyo3(signature = (n, n3, r_star, m, v = 0.0, seed = 1, measurement = "gaussian"))]
#[allow(clippy::too_many_arguments)]
fn gen_problem<'py>(
    py: Python<'py>,
    n: usize,
    n3: usize,
    r_star: usize,
    m: usize,
    v: f64,
    seed: u64,
    measurement: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let p = ProblemParams::new(n, n3, r_star, m, v, seed)
        .with_mode(mode(measurement)?)
        .generate()
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("x_star", export(&p.x_star))?;
    d.set_item("f_star", export(&p.f_star))?;
    d.set_item("y", p.y)?;
    d.set_item("noise", p.noise)?;
    d.set_item("sigma1", p.spectrum.sigma1)?;
    d.set_item("sigma_min", p.spectrum.sigma_min)?;
    d.set_item("kappa", p.spectrum.kappa)?;
    Ok(d)
}

/// Generates an instance and runs FGD with rank `r`. `tol` stops on relative
/// error; without it the run stops on relative change `5e-4`. Passing `rho`
/// replaces `eta` by `1 / (rho * sigma1_hat)`.
#[pyfunction]
#[pyo3(signature = (n, n3, r_star, m, r, v = 0.0, seed = 1, eta = 1e-3, rho = None, max_iters = 1000, tol = None, measurement = "gaussian"))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    n: usize,
    n3: usize,
    r_star: usize,
    m: usize,
    r: usize,
    v: f64,
    seed: u64,
    eta: f64,
    rho: Option<f64>,
    max_iters: usize,
    tol: Option<f64>,
    measurement: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let p = ProblemParams::new(n, n3, r_star, m, v, seed)
        .with_mode(mode(measurement)?)
        .generate()
        .map_err(to_py)?;
    let cfg = FgdConfig {
        eta,
        max_iters,
        eta_mode: rho.map_or(EtaMode::Fixed, |rho| EtaMode::Auto { rho }),
        stop: tol.map_or(StopRule::RelChange(5e-4), StopRule::RelError),
        ..FgdConfig::new(r)
    };
    let res = py.detach(|| fgd_solve(&p, &cfg)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("eta", res.eta)?;
    d.set_item("iterations", res.iterations)?;
    d.set_item("stop_reason", res.stop_reason.to_string())?;
    d.set_item("rel_errors", res.trace.rel_errors())?;
    d.set_item("objectives", res.trace.objectives())?;
    d.set_item("x_final", export(&res.x_final))?;
    Ok(d)
}

/// Monte-Carlo T-RIP estimate: `(delta_hat, ratio_samples)`.
#[pyfunction]
#[pyo3(signature = (n, n3, r, m, trials = 50, seed = 1, measurement = "gaussian"))]
#[allow(clippy::too_many_arguments)]
fn empirical_rip(
    py: Python<'_>,
    n: usize,
    n3: usize,
    r: usize,
    m: usize,
    trials: usize,
    seed: u64,
    measurement: &str,
) -> PyResult<(f64, Vec<f64>)> {
    let mode = mode(measurement)?;
    let est = py
        .detach(|| empirical_rip_with_mode(n, n3, r, m, trials, seed, mode))
        .map_err(to_py)?;
    Ok((est.delta_hat, est.ratio_samples))
}

/// Runs a CLI command with `key -> value` settings; returns the files written.
#[pyfunction]
#[pyo3(signature = (command, settings = None))]
fn run_experiment(
    py: Python<'_>,
    command: &str,
    settings: Option<Vec<(String, String)>>,
) -> PyResult<Vec<String>> {
    let cmd: Command = command.parse().map_err(to_py)?;
    let cfg = ExperimentConfig::load(cmd, None, &settings.unwrap_or_default()).map_err(to_py)?;
    let out = py.detach(|| experiments::run(&cfg)).map_err(to_py)?;
    Ok(out.files.iter().map(|f| f.display().to_string()).collect())
}

#[pyfunction]
fn read_tensor(path: PathBuf) -> PyResult<PyTensor> {
    Ok(export(&experiments::read_tensor(path).map_err(to_py)?))
}

#[pyfunction]
fn write_tensor(path: PathBuf, t: PyTensor) -> PyResult<()> {
    experiments::write_tensor(path, &tensor(t.0, t.1)?).map_err(to_py)
}

#[pymodule]
fn tubal_fgd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(t_product, m)?)?;
    m.add_function(wrap_pyfunction!(conj_transpose, m)?)?;
    m.add_function(wrap_pyfunction!(tubal_rank, m)?)?;
    m.add_function(wrap_pyfunction!(gen_problem, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_rip, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(read_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(write_tensor, m)?)?;
    Ok(())
}
