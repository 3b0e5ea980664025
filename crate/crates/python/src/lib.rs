//! Python bindings: configuration, grids, shape functions, exact levels and
//! the full solve pipeline.

use faer::Mat;
use hpcloud_core::enrichment::EnrichmentBasis;
use hpcloud_core::{self as core, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyComplex;

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Flat `key = value` run configuration.
#[pyclass(name = "RunConfig", module = "hpcloud")]
#[derive(Clone)]
pub struct PyRunConfig {
    inner: core::RunConfig,
}

#[pymethods]
impl PyRunConfig {
    /// Defaults, overridden by `text` and then by keyword arguments.
    #[new]
    #[pyo3(signature = (text = None, **overrides))]
    fn new(text: Option<&str>, overrides: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut inner = core::RunConfig::default();
        if let Some(t) = text {
            inner.apply_text(t).map_err(to_py)?;
        }
        if let Some(kw) = overrides {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                let value = v.str()?.to_string();
                inner.set(&key, &value).map_err(to_py)?;
            }
        }
        Ok(Self { inner })
    }

    fn set(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        self.inner.set(key, &value.str()?.to_string()).map_err(to_py)
    }

    fn get(&self, key: &str) -> PyResult<String> {
        self.inner.get(key).map_err(to_py)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[staticmethod]
    fn keys() -> Vec<&'static str> {
        core::config::CONFIG_KEYS.to_vec()
    }

    fn __repr__(&self) -> String {
        let fields: Vec<String> = self.inner.to_text().lines().map(str::to_string).collect();
        format!("RunConfig({})", fields.join(", "))
    }
}

/// Exponentially graded mesh with per-node dilations.
#[pyclass(name = "Grid", module = "hpcloud")]
#[derive(Clone)]
pub struct PyGrid {
    inner: core::Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (n_intervals = 600, domain_start = 0.0, domain_end = 100.0, eps = 1e-5, nu = 2.2))]
    fn new(n_intervals: usize, domain_start: f64, domain_end: f64, eps: f64, nu: f64) -> PyResult<Self> {
        let cfg = core::GridConfig { n_intervals, domain_start, domain_end, eps, nu };
        Ok(Self { inner: core::generate_grid(&cfg).map_err(to_py)? })
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    #[getter]
    fn spacings(&self) -> Vec<f64> {
        self.inner.spacings().to_vec()
    }

    #[getter]
    fn dilations(&self) -> Vec<f64> {
        self.inner.dilations().to_vec()
    }

    #[getter]
    fn max_spacing(&self) -> f64 {
        self.inner.max_spacing()
    }

    fn __len__(&self) -> usize {
        self.inner.nodes().len()
    }
}

/// MLS cloud basis with FEM hats on the first two and last two nodes.
#[pyclass(name = "CloudBasis", module = "hpcloud")]
pub struct PyCloudBasis {
    inner: core::CloudBasis,
}

#[pymethods]
impl PyCloudBasis {
    #[new]
    #[pyo3(signature = (grid, enrichment = "sto", z = 118.0))]
    fn new(grid: PyRef<'_, PyGrid>, enrichment: &str, z: f64) -> PyResult<Self> {
        let basis = EnrichmentBasis::from_name(enrichment, z).map_err(to_py)?;
        Ok(Self { inner: core::CloudBasis::coupled(grid.inner.clone(), basis).map_err(to_py)? })
    }

    /// `(node indices, values, derivatives)` of the shape functions active at `x`.
    fn evaluate(&self, x: f64) -> PyResult<(Vec<usize>, Vec<f64>, Vec<f64>)> {
        let e = self.inner.evaluate_coupled(x).map_err(to_py)?;
        Ok((e.active_indices, e.values, e.derivs))
    }
}

/// Result of one solve.
#[pyclass(name = "SolveResult", module = "hpcloud")]
pub struct PySolveResult {
    inner: core::SolveOutcome,
}

#[pymethods]
impl PySolveResult {
    #[getter]
    fn dofs(&self) -> usize {
        self.inner.dofs
    }

    #[getter]
    fn max_spacing(&self) -> f64 {
        self.inner.max_spacing
    }

    #[getter]
    fn positive_shifted(&self) -> Vec<f64> {
        self.inner.report.positive_shifted.clone()
    }

    #[getter]
    fn negative_shifted(&self) -> Vec<f64> {
        self.inner.report.negative_shifted.clone()
    }

    #[getter]
    fn flags(&self) -> Vec<&'static str> {
        self.inner.report.flags.iter().map(|f| f.name()).collect()
    }

    /// `(level, computed, exact, relative_error)` per matched level.
    #[getter]
    fn levels(&self) -> Vec<(usize, f64, f64, f64)> {
        self.inner
            .report
            .matches
            .iter()
            .map(|m| (m.level, m.computed, m.exact, m.relative_error))
            .collect()
    }

    #[getter]
    fn max_residual(&self) -> f64 {
        self.inner.max_residual()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveResult(method={}, dofs={}, matched={})",
            self.inner.config.method.name(),
            self.inner.dofs,
            self.inner.report.matches.len()
        )
    }
}

/// Runs the full pipeline; the GIL is released while solving.
#[pyfunction]
fn solve(py: Python<'_>, config: PyRef<'_, PyRunConfig>) -> PyResult<PySolveResult> {
    let cfg = config.inner.clone();
    let out = py.detach(move || core::run_solve(&cfg)).map_err(to_py)?;
    Ok(PySolveResult { inner: out })
}

/// Closed-form Dirac level `n_r` (shifted by `-m c^2`).
#[pyfunction]
#[pyo3(signature = (z, kappa, nr, c = None))]
fn exact_eigenvalue(z: f64, kappa: i32, nr: u32, c: Option<f64>) -> PyResult<f64> {
    let mut sys = core::PhysicalSystem::hydrogen_like(z, kappa);
    if let Some(c) = c {
        sys.c = c;
    }
    sys.exact_eigenvalue(nr).map_err(to_py)
}

fn dense(rows: &[Vec<f64>], name: &str) -> PyResult<Mat<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err(format!("{name} must be square")));
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

/// All eigenvalues of the pencil `(A, B)` given as nested lists.
#[pyfunction]
fn solve_generalized<'py>(py: Python<'py>, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<Vec<Bound<'py, PyComplex>>> {
    let (am, bm) = (dense(&a, "a")?, dense(&b, "b")?);
    let eigs = core::solve_generalized(am.as_ref(), bm.as_ref()).map_err(to_py)?;
    Ok(eigs.into_iter().map(|z| PyComplex::from_doubles(py, z.re, z.im)).collect())
}

/// Least-squares slope of `log(err)` against `log(h)`.
#[pyfunction]
fn convergence_rate(samples: Vec<(f64, f64)>) -> PyResult<f64> {
    core::convergence_rate(&samples).map_err(to_py)
}

#[pymodule]
fn hpcloud(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyCloudBasis>()?;
    m.add_class::<PySolveResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(exact_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(solve_generalized, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_rate, m)?)?;
    Ok(())
}
