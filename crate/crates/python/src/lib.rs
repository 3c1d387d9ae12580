//! Python bindings. Structured results are returned as plain dicts decoded
//! from the same JSON the command-line tool emits.

use nalgebra::DVector;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use phaseless::problem::SignPattern;
use phaseless::{Error, Observation, SenseMatrix};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::SearchExhausted { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn obs(b: Vec<f64>) -> PyResult<Observation> {
    Observation::from_slice(&b).map_err(to_py)
}

fn vec(x: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(x)
}

/// Measurement matrix built from a list of rows.
#[pyclass(name = "SenseMatrix", module = "pyphaseless", frozen)]
struct PySenseMatrix {
    inner: SenseMatrix,
}

#[pymethods]
impl PySenseMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        SenseMatrix::from_rows(&rows).map(|inner| Self { inner }).map_err(to_py)
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn sigma_max(&self) -> f64 {
        self.inner.sigma_max()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows()
    }

    /// The orthonormal-column matrix with the same phaseless measurements.
    fn whitened(&self) -> PyResult<Self> {
        let w = phaseless::whiten(&self.inner).map_err(to_py)?;
        Ok(Self {
            inner: w.whitened_matrix().expect("whitening present"),
        })
    }

    fn abs_measure(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(phaseless::abs_measure(&self.inner, &vec(x)).map_err(to_py)?.as_slice().to_vec())
    }

    fn objective(&self, b: Vec<f64>, x: Vec<f64>) -> PyResult<f64> {
        phaseless::objective(&self.inner, &obs(b)?, &vec(x)).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("SenseMatrix(m={}, d={}, rank={})", self.inner.m(), self.inner.d(), self.inner.rank())
    }
}

#[pyfunction]
#[pyo3(signature = (a, b, tol = phaseless::solver::DEFAULT_TIE_RTOL))]
fn solve_global<'py>(py: Python<'py>, a: &PySenseMatrix, b: Vec<f64>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let set = phaseless::solve_global(&a.inner, &obs(b)?, tol).map_err(to_py)?;
    to_dict(py, &set)
}

#[pyfunction]
fn surface_distance(a: &PySenseMatrix, b: Vec<f64>) -> PyResult<f64> {
    phaseless::surface_distance(&a.inner, &obs(b)?).map_err(to_py)
}

#[pyfunction]
fn cone_project<'py>(py: Python<'py>, a: &PySenseMatrix, pattern: Vec<i8>, b: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let eps = SignPattern::new(pattern).map_err(to_py)?;
    to_dict(py, &phaseless::cone_project(&a.inner, &eps, &obs(b)?).map_err(to_py)?)
}

#[pyfunction]
#[pyo3(signature = (a, b, tol = phaseless::geometry::DEFAULT_BEST_APPROX_TOL))]
fn best_approximations<'py>(py: Python<'py>, a: &PySenseMatrix, b: Vec<f64>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &phaseless::best_approximations(&a.inner, &obs(b)?, tol).map_err(to_py)?)
}

#[pyfunction]
fn complement_property<'py>(py: Python<'py>, a: &PySenseMatrix) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &phaseless::complement_property(&a.inner).map_err(to_py)?)
}

#[pyfunction]
fn scp_sigma<'py>(py: Python<'py>, a: &PySenseMatrix) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &phaseless::scp_sigma(&a.inner).map_err(to_py)?)
}

#[pyfunction]
fn gaussian_scp_bound(m: usize, d: usize, eps: f64) -> PyResult<f64> {
    phaseless::gaussian_scp_bound(m, d, eps).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (a, b, tol = phaseless::certificates::DEFAULT_POLY_TOL))]
fn poly_screen<'py>(py: Python<'py>, a: &PySenseMatrix, b: Vec<f64>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &phaseless::poly_screen(&a.inner, &obs(b)?, tol).map_err(to_py)?)
}

#[pyfunction]
fn near_surface_uniqueness<'py>(
    py: Python<'py>,
    a: &PySenseMatrix,
    x0: Vec<f64>,
    eta: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &phaseless::near_surface_uniqueness(&a.inner, &vec(x0), &vec(eta)).map_err(to_py)?)
}

#[pyfunction]
#[pyo3(signature = (a, b, tol = phaseless::solver::DEFAULT_TIE_RTOL))]
fn certify_unique<'py>(py: Python<'py>, a: &PySenseMatrix, b: Vec<f64>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &phaseless::certify_unique(&a.inner, &obs(b)?, tol).map_err(to_py)?)
}

#[pyfunction]
#[pyo3(signature = (a, budget = 100, seed = 0))]
fn nonconvexity_witness<'py>(py: Python<'py>, a: &PySenseMatrix, budget: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &phaseless::nonconvexity_witness(&a.inner, budget, seed).map_err(to_py)?)
}

#[pyfunction]
fn instability_witness<'py>(py: Python<'py>, a: &PySenseMatrix, b0: Vec<f64>, epsilon: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &phaseless::instability_witness(&a.inner, &obs(b0)?, epsilon).map_err(to_py)?)
}

#[pyfunction]
#[pyo3(signature = (a, trials, seed = 0))]
fn nonunique_seed_search(a: &PySenseMatrix, trials: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let seeds = phaseless::nonunique_seed_search(&a.inner, trials, seed).map_err(to_py)?;
    Ok(seeds.iter().map(|b| b.values().as_slice().to_vec()).collect())
}

#[pyfunction]
#[pyo3(signature = (a, center, radius, samples, seed = 0))]
fn convex_region_scan<'py>(
    py: Python<'py>,
    a: &PySenseMatrix,
    center: Vec<f64>,
    radius: f64,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &phaseless::convex_region_scan(&a.inner, &obs(center)?, radius, samples, seed).map_err(to_py)?)
}

#[pyfunction]
fn solution_set_distance(a: &PySenseMatrix, b1: Vec<f64>, b2: Vec<f64>) -> PyResult<f64> {
    phaseless::solution_set_distance(&a.inner, &obs(b1)?, &obs(b2)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (a, b, x0, max_iters = 1000, tol = 1e-12))]
fn fixed_point_iterate<'py>(
    py: Python<'py>,
    a: &PySenseMatrix,
    b: Vec<f64>,
    x0: Vec<f64>,
    max_iters: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &phaseless::fixed_point_iterate(&a.inner, &obs(b)?, &vec(x0), max_iters, tol).map_err(to_py)?)
}

#[pymodule]
fn pyphaseless(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySenseMatrix>()?;
    m.add_function(wrap_pyfunction!(solve_global, m)?)?;
    m.add_function(wrap_pyfunction!(surface_distance, m)?)?;
    m.add_function(wrap_pyfunction!(cone_project, m)?)?;
    m.add_function(wrap_pyfunction!(best_approximations, m)?)?;
    m.add_function(wrap_pyfunction!(complement_property, m)?)?;
    m.add_function(wrap_pyfunction!(scp_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_scp_bound, m)?)?;
    m.add_function(wrap_pyfunction!(poly_screen, m)?)?;
    m.add_function(wrap_pyfunction!(near_surface_uniqueness, m)?)?;
    m.add_function(wrap_pyfunction!(certify_unique, m)?)?;
    m.add_function(wrap_pyfunction!(nonconvexity_witness, m)?)?;
    m.add_function(wrap_pyfunction!(instability_witness, m)?)?;
    m.add_function(wrap_pyfunction!(nonunique_seed_search, m)?)?;
    m.add_function(wrap_pyfunction!(convex_region_scan, m)?)?;
    m.add_function(wrap_pyfunction!(solution_set_distance, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_point_iterate, m)?)?;
    Ok(())
}
