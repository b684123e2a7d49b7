//! Python bindings: lattice models, local thermal susceptibility, the
//! closed-form bounds, and single-point bound reports.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lqts::bounds::{self, XiProvider, DEFAULT_LOCALITY_THRESHOLD, INEQUALITY_TOL};
use lqts::harness::{self, RPolicy};
use lqts::lattice::{LatticeModel, ModelSpec};
use lqts::thermometry::{self, ThermalContext};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A locally interacting lattice spin model.
#[pyclass]
struct Model {
    inner: LatticeModel,
}

#[pymethods]
impl Model {
    /// Transverse-field Ising chain on `n` qubits.
    #[staticmethod]
    #[pyo3(signature = (n, h=0.0, periodic=false))]
    fn ising_chain(n: usize, h: f64, periodic: bool) -> PyResult<Self> {
        let spec = ModelSpec::ising_chain(n, h, periodic);
        Ok(Model { inner: spec.to_model().map_err(value_err)? })
    }

    /// Model from the JSON spec format used by the CLI.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec = ModelSpec::from_json(text).map_err(value_err)?;
        Ok(Model { inner: spec.to_model().map_err(value_err)? })
    }

    #[staticmethod]
    fn from_path(path: &str) -> PyResult<Self> {
        Ok(Model { inner: LatticeModel::from_path(path).map_err(value_err)? })
    }

    #[getter]
    fn n_sites(&self) -> usize {
        self.inner.n_sites()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.n_edges()
    }

    #[getter]
    fn diameter(&self) -> usize {
        self.inner.diameter()
    }

    /// Edge-chain distance between two sites; None when unreachable.
    fn site_distance(&self, x: usize, y: usize) -> PyResult<Option<usize>> {
        self.inner.site_distance(x, y).map_err(value_err)
    }

    /// The constants entering the bound formulas:
    /// (J, N, N_boundary, M).
    fn geometry(&self) -> PyResult<(f64, usize, usize, f64)> {
        let g = self.inner.geometry_constants().map_err(value_err)?;
        Ok((g.j, g.n_max, g.n_boundary, g.m_growth))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(sites={}, edges={})",
            self.inner.n_sites(),
            self.inner.n_edges()
        )
    }
}

/// Quantum Fisher information of the reduced thermal state with respect to
/// inverse temperature.
#[pyfunction]
fn local_qfi(model: &Model, sites: Vec<usize>, beta: f64) -> PyResult<f64> {
    thermometry::local_qfi(&model.inner, &sites, beta).map_err(runtime_err)
}

/// Variance of the subsystem Hamiltonian under its own canonical state.
#[pyfunction]
fn canonical_qfi(model: &Model, sites: Vec<usize>, beta: f64) -> PyResult<f64> {
    thermometry::canonical_qfi(&model.inner, &sites, beta).map_err(runtime_err)
}

/// Independent finite-difference fidelity cross-check of `local_qfi`.
#[pyfunction]
fn qfi_fd_oracle(model: &Model, sites: Vec<usize>, beta: f64, delta: f64) -> PyResult<f64> {
    thermometry::qfi_fd_oracle(&model.inner, &sites, beta, delta).map_err(runtime_err)
}

/// Cramér-Rao floor 1/F on the mean-square error of a temperature estimate.
#[pyfunction]
fn cramer_rao_precision(f: f64) -> f64 {
    thermometry::cramer_rao_precision(f)
}

/// Closed-form correlation length of the 1D Ising chain.
#[pyfunction]
fn ising_xi(beta: f64, j: f64) -> PyResult<f64> {
    bounds::ising_xi(beta, j).map_err(value_err)
}

/// Upper edge of the closed form's validity domain in beta.
#[pyfunction]
fn ising_beta_star(j: f64) -> f64 {
    bounds::ising_beta_star(j)
}

/// Fully evaluated bound point as a JSON string (same schema as the CLI's
/// `bound` subcommand). `xi=None` uses the Ising closed form.
#[pyfunction]
#[pyo3(signature = (model, sites, beta, xi=None))]
fn bound_report(model: &Model, sites: Vec<usize>, beta: f64, xi: Option<f64>) -> PyResult<String> {
    let provider = match xi {
        Some(v) => XiProvider::UserConstant { xi: v },
        None => {
            let g = model.inner.geometry_constants().map_err(value_err)?;
            XiProvider::ClosedFormIsing { j: g.j }
        }
    };
    let ctx = ThermalContext::new(&model.inner, beta).map_err(runtime_err)?;
    let report = harness::evaluate_point(
        &ctx,
        &sites,
        &provider,
        &RPolicy::Optimize { r_max: None },
        DEFAULT_LOCALITY_THRESHOLD,
        INEQUALITY_TOL,
    )
    .map_err(runtime_err)?;
    serde_json::to_string(&report).map_err(runtime_err)
}

/// Empirical correlation length from exact connected correlators.
#[pyfunction]
fn fit_xi(model: &Model, beta: f64, max_distance: usize) -> PyResult<f64> {
    harness::fit_xi_empirical(
        &model.inner,
        beta,
        &harness::default_fit_observable(),
        max_distance,
    )
    .map_err(runtime_err)
}

#[pymodule]
fn lqts_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(local_qfi, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_qfi, m)?)?;
    m.add_function(wrap_pyfunction!(qfi_fd_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(cramer_rao_precision, m)?)?;
    m.add_function(wrap_pyfunction!(ising_xi, m)?)?;
    m.add_function(wrap_pyfunction!(ising_beta_star, m)?)?;
    m.add_function(wrap_pyfunction!(bound_report, m)?)?;
    m.add_function(wrap_pyfunction!(fit_xi, m)?)?;
    Ok(())
}
