//! Python bindings: domains, conformal maps, disk solves, Pohozaev checks,
//! certificates and the experiment harness.

use std::cell::RefCell;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use massbound::certificates::{liouville_certificate, MassCertificate};
use massbound::conformal::{self, transform_potential, Direction, PotentialField};
use massbound::disk::{self, BranchFamily, DiskSolution, NewtonOptions, PolarGrid, ProblemSpec};
use massbound::geometry::{self, DomainKind, DomainSpec};
use massbound::harness;
use massbound::pohozaev::{self, PohozaevReport};

fn err(e: massbound::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(frozen, name = "Domain")]
struct PyDomain(DomainSpec);

#[pymethods]
impl PyDomain {
    #[staticmethod]
    fn unit_disk() -> PyResult<Self> {
        Self::build(DomainKind::UnitDisk {})
    }

    #[staticmethod]
    fn ellipse(a: f64, b: f64) -> PyResult<Self> {
        Self::build(DomainKind::Ellipse { a, b })
    }

    #[staticmethod]
    #[pyo3(signature = (cos, sin = Vec::new()))]
    fn fourier_blob(cos: Vec<f64>, sin: Vec<f64>) -> PyResult<Self> {
        Self::build(DomainKind::FourierBlob { cos, sin })
    }

    #[staticmethod]
    fn dumbbell(neck_width: f64) -> PyResult<Self> {
        Self::build(DomainKind::Dumbbell { neck_width })
    }

    /// `n` boundary points as `(x, y)` pairs.
    fn samples(&self, n: usize) -> Vec<(f64, f64)> {
        self.0.samples(n).into_iter().map(|p| (p[0], p[1])).collect()
    }
}

impl PyDomain {
    fn build(kind: DomainKind) -> PyResult<Self> {
        geometry::build_domain(kind).map(Self).map_err(err)
    }
}

#[pyclass(frozen, name = "ConformalMap")]
struct PyConformalMap(Arc<conformal::ConformalMap>);

#[pymethods]
impl PyConformalMap {
    #[new]
    #[pyo3(signature = (domain, nodes = 512))]
    fn new(domain: &PyDomain, nodes: usize) -> PyResult<Self> {
        conformal::compute_map(&domain.0, nodes).map(|m| Self(Arc::new(m))).map_err(err)
    }

    /// `Φ(x)` for a point of the domain.
    fn forward(&self, x: f64, y: f64) -> PyResult<(f64, f64)> {
        let p = self.0.map_point([x, y], Direction::Forward).map_err(err)?;
        Ok((p[0], p[1]))
    }

    /// `Φ⁻¹(y)` for a point of the unit disk.
    fn inverse(&self, x: f64, y: f64) -> PyResult<(f64, f64)> {
        let p = self.0.map_point([x, y], Direction::Inverse).map_err(err)?;
        Ok((p[0], p[1]))
    }

    #[getter]
    fn derivative_at_origin(&self) -> f64 {
        self.0.derivative_at_origin()
    }

    #[getter]
    fn distortion(&self) -> f64 {
        self.0.distortion()
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.0.residual
    }
}

#[pyclass(frozen, name = "Grid")]
struct PyGrid(Arc<PolarGrid>);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (n_r, n_theta, alpha = 0.0, grading = 1.0))]
    fn new(n_r: usize, n_theta: usize, alpha: f64, grading: f64) -> PyResult<Self> {
        disk::build_grid(n_r, n_theta, alpha, grading).map(|g| Self(Arc::new(g))).map_err(err)
    }

    #[getter]
    fn n_r(&self) -> usize {
        self.0.n_r
    }

    #[getter]
    fn n_theta(&self) -> usize {
        self.0.n_theta
    }
}

#[pyclass(frozen, name = "Field")]
struct PyField(Arc<PotentialField>);

#[pymethods]
impl PyField {
    /// Constant `K̃` on the grid.
    #[staticmethod]
    fn constant(grid: &PyGrid, value: f64) -> PyResult<Self> {
        PotentialField::constant(&grid.0, value).map(|f| Self(Arc::new(f))).map_err(err)
    }

    /// Transports `k(x, y)` (a float or a callable) through `map`.
    #[staticmethod]
    fn transported(map: &PyConformalMap, alpha: f64, k: &Bound<'_, PyAny>, grid: &PyGrid) -> PyResult<Self> {
        let failure: RefCell<Option<PyErr>> = RefCell::new(None);
        let constant = k.extract::<f64>().ok();
        let eval = |x: [f64; 2]| -> f64 {
            if let Some(c) = constant {
                return c;
            }
            match k.call1((x[0], x[1])).and_then(|v| v.extract::<f64>()) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            }
        };
        let field = transform_potential(&map.0, alpha, eval, &grid.0);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        field.map(|f| Self(Arc::new(f))).map_err(err)
    }

    #[getter]
    fn inf(&self) -> f64 {
        self.0.extrema.inf
    }

    #[getter]
    fn sup(&self) -> f64 {
        self.0.extrema.sup
    }
}

#[pyclass(frozen, name = "Solution")]
struct PySolution(DiskSolution);

#[pymethods]
impl PySolution {
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }

    #[getter]
    fn center_value(&self) -> f64 {
        self.0.center_value()
    }

    #[getter]
    fn sup_norm(&self) -> f64 {
        self.0.sup_norm
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.0.residual
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }

    fn mass(&self) -> PyResult<f64> {
        pohozaev::mass(&self.0).map_err(err)
    }

    fn pohozaev(&self) -> PyResult<PyPohozaev> {
        pohozaev::pohozaev_report(&self.0).map(PyPohozaev).map_err(err)
    }
}

#[pyclass(frozen, name = "PohozaevReport")]
struct PyPohozaev(PohozaevReport);

#[pymethods]
impl PyPohozaev {
    #[getter]
    fn lhs(&self) -> f64 {
        self.0.lhs
    }

    #[getter]
    fn relative_residual(&self) -> f64 {
        self.0.relative_residual()
    }

    #[getter]
    fn holder_gap(&self) -> f64 {
        self.0.holder_gap
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }
}

#[pyclass(frozen, name = "Certificate")]
struct PyCertificate(MassCertificate);

#[pymethods]
impl PyCertificate {
    #[getter]
    fn rho0(&self) -> f64 {
        self.0.rho0
    }

    fn admits(&self, mass: f64, allowance: f64) -> bool {
        self.0.admits(mass, allowance)
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }
}

/// Newton solve of `-Δv = λ|y|^{2α} K̃ e^v` on the unit disk.
#[pyfunction]
#[pyo3(signature = (lam, alpha, k, grid, tol = 1e-10, initial_guess = None))]
fn solve_liouville(
    py: Python<'_>,
    lam: f64,
    alpha: f64,
    k: &PyField,
    grid: &PyGrid,
    tol: f64,
    initial_guess: Option<Vec<f64>>,
) -> PyResult<PySolution> {
    let problem = Arc::new(ProblemSpec::Liouville { lambda: lam, alpha, k: k.0.clone() });
    let grid = grid.0.clone();
    py.detach(|| disk::solve_newton(problem, grid, initial_guess.as_deref(), &NewtonOptions::with_tol(tol)))
        .map(PySolution)
        .map_err(err)
}

/// Hénon problem `-Δv = |y|^{2α} K̃ v^p`, `v > 0`.
#[pyfunction]
#[pyo3(signature = (p, alpha, k, grid, tol = 1e-10))]
fn solve_henon(py: Python<'_>, p: f64, alpha: f64, k: &PyField, grid: &PyGrid, tol: f64) -> PyResult<PySolution> {
    let problem = Arc::new(ProblemSpec::Henon { p, alpha, k: k.0.clone() });
    let grid = grid.0.clone();
    py.detach(|| disk::solve_newton(problem, grid, None, &NewtonOptions::with_tol(tol)))
        .map(PySolution)
        .map_err(err)
}

/// Liouville branch through the given centre values. Returns
/// `(entries, fold)` with entries `(s, λ, mass, sup_norm, residual)` and the
/// fold as `(s, λ)` or `None`.
#[pyfunction]
#[pyo3(signature = (alpha, k, s_values, grid, tol = 1e-10))]
#[allow(clippy::type_complexity)]
fn liouville_branch(
    py: Python<'_>,
    alpha: f64,
    k: &PyField,
    s_values: Vec<f64>,
    grid: &PyGrid,
    tol: f64,
) -> PyResult<(Vec<(f64, f64, f64, f64, f64)>, Option<(f64, f64)>)> {
    let family = BranchFamily::Liouville { alpha, k: k.0.clone() };
    let grid = grid.0.clone();
    let branch = py
        .detach(|| disk::continuation_at(family, &s_values, grid, &NewtonOptions::with_tol(tol)))
        .map_err(err)?;
    let entries = branch
        .entries
        .iter()
        .map(|e| (e.s, e.lambda_or_p, e.mass, e.sup_norm, e.residual))
        .collect();
    Ok((entries, branch.fold.map(|f| (f.s, f.lambda))))
}

/// Closed-form radial solution with parameter `b`: `(λ, mass, sup_norm)`.
#[pyfunction]
fn radial_oracle(alpha: f64, b: f64) -> PyResult<(f64, f64, f64)> {
    let o = disk::radial_oracle(alpha, b).map_err(err)?;
    Ok((o.lambda, o.mass, o.sup_norm))
}

#[pyfunction]
#[pyo3(name = "liouville_certificate")]
fn py_liouville_certificate(alpha: f64, k: &PyField) -> PyResult<PyCertificate> {
    liouville_certificate(alpha, &k.0).map(PyCertificate).map_err(err)
}

/// Configurations of a builtin experiment as JSON strings.
#[pyfunction]
fn builtin_configs(name: &str) -> PyResult<Vec<String>> {
    harness::builtin(name)
        .map_err(err)?
        .iter()
        .map(|c| c.to_json().map_err(err))
        .collect()
}

/// Runs an experiment given as a JSON config and returns the report as JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = harness::ExperimentConfig::from_json(config_json).map_err(err)?;
    let report = py.detach(|| harness::run_experiment(&cfg)).map_err(err)?;
    json(&report)
}

#[pymodule(name = "massbound")]
fn massbound_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_class::<PyConformalMap>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyPohozaev>()?;
    m.add_class::<PyCertificate>()?;
    m.add_function(wrap_pyfunction!(solve_liouville, m)?)?;
    m.add_function(wrap_pyfunction!(solve_henon, m)?)?;
    m.add_function(wrap_pyfunction!(liouville_branch, m)?)?;
    m.add_function(wrap_pyfunction!(radial_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(py_liouville_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_configs, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
