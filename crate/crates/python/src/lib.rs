//! Python bindings: run configurations, solve the heat benchmark, DEIM selection.

use faer::Mat;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mfrom::config::RunConfig;
use mfrom::deim::{deim_select, DeimVariant};
use mfrom::experiment::{run_method, summarize, write_artifacts, Setup};
use mfrom::heat::HeatProblem;
use mfrom::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Missing(_) | Error::Domain(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn run(cfg: RunConfig, write: bool) -> mfrom::Result<String> {
    cfg.validate()?;
    let dir = cfg.resolved_out_dir();
    let mut setup = Setup::new(cfg)?;
    setup.prepare()?;
    let report = run_method(&setup)?;
    let summary = summarize(&setup, report);
    if write {
        write_artifacts(&setup, &summary, &dir)?;
    }
    Ok(serde_json::to_string(&summary)?)
}

/// Runs a TOML (or .json) configuration file and returns the JSON report.
#[pyfunction]
#[pyo3(signature = (path, write_artifacts = false))]
fn run_config(py: Python<'_>, path: &str, write_artifacts: bool) -> PyResult<String> {
    let cfg = RunConfig::from_path(std::path::Path::new(path)).map_err(to_py)?;
    py.detach(|| run(cfg, write_artifacts)).map_err(to_py)
}

/// Runs a configuration given as TOML text and returns the JSON report.
#[pyfunction]
fn run_toml(py: Python<'_>, text: &str) -> PyResult<String> {
    let cfg = RunConfig::from_toml(text).map_err(to_py)?;
    py.detach(|| run(cfg, false)).map_err(to_py)
}

/// Nodal heat solution on an `n x n` mesh at `mu = (mu_1, mu_2)`.
#[pyfunction]
#[pyo3(signature = (mu, n = 28))]
fn heat_solve(py: Python<'_>, mu: Vec<f64>, n: usize) -> PyResult<Vec<f64>> {
    py.detach(|| {
        let p = HeatProblem::new(n, n, 0.5)?;
        Ok(p.system.solve(&mu)?.nodal)
    })
    .map_err(to_py)
}

/// DEIM row indices of a column-major basis given as a list of columns.
#[pyfunction]
fn deim(columns: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
    let Some(n) = columns.first().map(Vec::len) else {
        return Ok(Vec::new());
    };
    if columns.iter().any(|c| c.len() != n) {
        return Err(PyValueError::new_err("columns must have equal length"));
    }
    let psi = Mat::from_fn(n, columns.len(), |i, j| columns[j][i]);
    deim_select(psi.as_ref(), columns.len(), DeimVariant::SelectedRows).map_err(to_py)
}

#[pymodule]
fn mfrom_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_toml, m)?)?;
    m.add_function(wrap_pyfunction!(heat_solve, m)?)?;
    m.add_function(wrap_pyfunction!(deim, m)?)?;
    Ok(())
}
