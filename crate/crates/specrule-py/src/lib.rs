//! Python bindings. Checks are returned as JSON strings; decode with `json.loads`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use specrule::liebthirring::{lt_monotonicity_and_bound, lt_rows, PotentialSpec};
use specrule::scenario::{run_scenario, to_json, ScenarioConfig, Suite};
use specrule::sumrules::{hs_quadratic_sum_rule, trk_sum_rule};
use specrule::{bessel, Eigensystem, HermitianMatrix, Matrix, SpecError};

fn to_py(e: SpecError) -> PyErr {
    match e {
        SpecError::Config { .. } | SpecError::InvalidArgument(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn complex_rows(rows: Vec<Vec<(f64, f64)>>) -> Vec<Vec<Complex64>> {
    rows.into_iter().map(|r| r.into_iter().map(|(re, im)| Complex64::new(re, im)).collect()).collect()
}

fn system(h: Vec<Vec<(f64, f64)>>) -> PyResult<Eigensystem> {
    let m = Matrix::from_rows(&complex_rows(h)).map_err(to_py)?;
    Eigensystem::new(HermitianMatrix::new(m).map_err(to_py)?).map_err(to_py)
}

/// Runs a suite and returns the report as JSON. `config` is scenario-file
/// text; `seed` overrides it.
#[pyfunction]
#[pyo3(signature = (suite, seed=None, config=None))]
fn run_suite(py: Python<'_>, suite: &str, seed: Option<u64>, config: Option<&str>) -> PyResult<String> {
    let suite = Suite::parse(suite).map_err(to_py)?;
    let mut cfg = match config {
        Some(text) => ScenarioConfig::parse(text, Some(suite)).map_err(to_py)?,
        None => ScenarioConfig::new(suite),
    };
    cfg.suite = suite;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = py.detach(|| run_scenario(&cfg));
    Ok(to_json(&report))
}

/// First `k` Dirichlet levels of the Bessel operator of order `nu` on `n`
/// grid cells, with their `nu`-derivatives, as JSON.
#[pyfunction]
#[pyo3(signature = (nu, k, n=400))]
fn bessel_levels(py: Python<'_>, nu: f64, k: usize, n: usize) -> PyResult<String> {
    let spec = py.detach(|| bessel::bessel_levels(nu, k, n)).map_err(to_py)?;
    json(&spec)
}

/// TRK sum rule for eigenvector `j`. Matrices are row lists of `(re, im)` pairs.
#[pyfunction]
fn trk(h: Vec<Vec<(f64, f64)>>, g: Vec<Vec<(f64, f64)>>, j: usize) -> PyResult<String> {
    let sys = system(h)?;
    let g = Matrix::from_rows(&complex_rows(g)).map_err(to_py)?;
    json(&trk_sum_rule(&sys, &g, j).map_err(to_py)?)
}

/// Quadratic sum rule over the eigenvector subset `subset` at shift `z`.
#[pyfunction]
fn hs_quadratic(h: Vec<Vec<(f64, f64)>>, g: Vec<Vec<(f64, f64)>>, subset: Vec<usize>, z: f64) -> PyResult<String> {
    let sys = system(h)?;
    let g = Matrix::from_rows(&complex_rows(g)).map_err(to_py)?;
    json(&hs_quadratic_sum_rule(&sys, &g, &subset, z).map_err(to_py)?)
}

/// Lieb–Thirring scan for a square well of depth `v0` and half-width `a`;
/// returns the row table as JSON.
#[pyfunction]
#[pyo3(signature = (v0, a, taus, n=2001))]
fn lieb_thirring_square_well(py: Python<'_>, v0: f64, a: f64, taus: Vec<f64>, n: usize) -> PyResult<String> {
    let rows = py
        .detach(|| {
            let spec = PotentialSpec::square_well(v0, a, n)?;
            lt_monotonicity_and_bound(&spec, &taus).map(|r| lt_rows(&r))
        })
        .map_err(to_py)?;
    json(&rows)
}

#[pymodule]
fn specrule_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SUITES", specrule::scenario::SUITES.to_vec())?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_levels, m)?)?;
    m.add_function(wrap_pyfunction!(trk, m)?)?;
    m.add_function(wrap_pyfunction!(hs_quadratic, m)?)?;
    m.add_function(wrap_pyfunction!(lieb_thirring_square_well, m)?)?;
    Ok(())
}
