//! Python bindings: grids, profiles, spectral parameters, Green's triples,
//! A(kappa), flows and the scenario pipelines.

use std::path::PathBuf;

use dnls_green::config::ScenarioConfig;
use dnls_green::flows::{self, Flow, SnapshotOptions};
use dnls_green::greens::{self, greens_dense_oracle, greens_jost};
use dnls_green::invariants::{self, TraceKernel, TraceMode};
use dnls_green::verify::{identity_suite, Tolerances};
use dnls_green::{scenario, ComplexField, Error, FieldPair, ProfileSpec, C64};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(std::sync::Arc<dnls_green::Grid>);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(half_length: f64, n: usize) -> PyResult<Self> {
        dnls_green::Grid::new(half_length, n)
            .map(PyGrid)
            .map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn half_length(&self) -> f64 {
        self.0.half_length()
    }

    fn x(&self) -> Vec<f64> {
        self.0.xs()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(half_length={}, n={})",
            self.0.half_length(),
            self.0.len()
        )
    }
}

#[pyclass(name = "SpectralParameter", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PySpectral(dnls_green::SpectralParameter);

#[pymethods]
impl PySpectral {
    #[new]
    #[pyo3(signature = (tau, branch = 1))]
    fn new(tau: f64, branch: i8) -> PyResult<Self> {
        dnls_green::SpectralParameter::with_branch(tau, branch)
            .map(PySpectral)
            .map_err(py_err)
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau()
    }

    #[getter]
    fn branch(&self) -> i8 {
        self.0.branch()
    }

    #[getter]
    fn kappa(&self) -> C64 {
        self.0.kappa()
    }

    fn flipped(&self) -> Self {
        PySpectral(self.0.flipped())
    }

    fn __repr__(&self) -> String {
        format!(
            "SpectralParameter(tau={}, branch={})",
            self.0.tau(),
            self.0.branch()
        )
    }
}

#[pyclass(name = "FieldPair", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFieldPair(FieldPair);

#[pymethods]
impl PyFieldPair {
    /// a exp(-((x - x0)/w)^2 + i chirp x^2 + i k0 x) with r = -conj q.
    #[staticmethod]
    #[pyo3(signature = (grid, a, w = 1.0, x0 = 0.0, chirp = 0.0, k0 = 0.0))]
    fn gaussian(grid: &PyGrid, a: f64, w: f64, x0: f64, chirp: f64, k0: f64) -> PyResult<Self> {
        dnls_green::sample_profile(
            &ProfileSpec::Gaussian {
                a,
                w,
                x0,
                chirp,
                k0,
            },
            &grid.0,
        )
        .map(PyFieldPair)
        .map_err(py_err)
    }

    #[staticmethod]
    fn zero(grid: &PyGrid) -> PyResult<Self> {
        dnls_green::sample_profile(&ProfileSpec::Zero, &grid.0)
            .map(PyFieldPair)
            .map_err(py_err)
    }

    /// Gauged pair from samples of q.
    #[staticmethod]
    fn from_q(grid: &PyGrid, q: Vec<C64>) -> PyResult<Self> {
        if q.len() != grid.0.len() {
            return Err(PyValueError::new_err(format!(
                "expected {} samples, got {}",
                grid.0.len(),
                q.len()
            )));
        }
        Ok(PyFieldPair(FieldPair::gauged(ComplexField::new(
            grid.0.clone(),
            q,
        ))))
    }

    #[staticmethod]
    fn independent(grid: &PyGrid, q: Vec<C64>, r: Vec<C64>) -> PyResult<Self> {
        let n = grid.0.len();
        if q.len() != n || r.len() != n {
            return Err(PyValueError::new_err(format!(
                "expected {n} samples for q and r"
            )));
        }
        Ok(PyFieldPair(FieldPair::from_values(&grid.0, q, r, false)))
    }

    fn q(&self) -> Vec<C64> {
        self.0.q().to_vec()
    }

    fn r(&self) -> Vec<C64> {
        self.0.r().to_vec()
    }

    #[getter]
    fn gauge(&self) -> bool {
        self.0.gauge
    }
}

#[pyclass(name = "DiagonalGreens", frozen)]
struct PyGreens(greens::DiagonalGreens);

#[pymethods]
impl PyGreens {
    fn gamma(&self) -> Vec<C64> {
        self.0.gamma().to_vec()
    }

    fn g12(&self) -> Vec<C64> {
        self.0.g12()
    }

    fn g21(&self) -> Vec<C64> {
        self.0.g21()
    }

    fn x(&self) -> Vec<f64> {
        self.0.grid().xs()
    }

    fn quadratic_residual(&self) -> f64 {
        self.0.quadratic_residual()
    }

    fn distance(&self, other: &PyGreens) -> f64 {
        self.0.distance(&other.0)
    }
}

/// Diagonal Green's triple; method is fixed_point, jost or dense (dense uses n_dense points).
#[pyfunction]
#[pyo3(signature = (pair, sp, method = "fixed_point", n_dense = 512))]
fn diagonal_greens(
    pair: &PyFieldPair,
    sp: &PySpectral,
    method: &str,
    n_dense: usize,
) -> PyResult<PyGreens> {
    let dg = match method {
        "fixed_point" => greens::greens(&pair.0, sp.0),
        "jost" => greens_jost(&pair.0, sp.0),
        "dense" => greens_dense_oracle(&pair.0, sp.0, n_dense),
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    dg.map(PyGreens).map_err(py_err)
}

/// A(kappa) from the density.
#[pyfunction]
fn a_kappa(pair: &PyFieldPair, sp: &PySpectral) -> PyResult<C64> {
    invariants::a_kappa(&pair.0, sp.0).map_err(py_err)
}

/// A(kappa) as sgn(tau) log det(I - K).
#[pyfunction]
fn a_log_det(pair: &PyFieldPair, sp: &PySpectral) -> PyResult<C64> {
    let kern = TraceKernel::new(&pair.0, sp.0).map_err(py_err)?;
    invariants::a_trace(&kern, TraceMode::LogDet)
        .map(|r| r.value)
        .map_err(py_err)
}

/// (M, H, E) polynomial conserved quantities.
#[pyfunction]
fn conserved(pair: &PyFieldPair) -> (C64, C64, C64) {
    let c = invariants::conserved_polynomials(&pair.0);
    (c.m, c.h_dnls, c.e_dnls)
}

fn flow_of(flow: &str, tau: Option<f64>) -> PyResult<Flow> {
    match (flow, tau) {
        ("dnls", _) => Ok(Flow::Dnls),
        ("akappa", Some(t)) => Ok(Flow::AKappa(
            dnls_green::SpectralParameter::new(t).map_err(py_err)?,
        )),
        ("akappa", None) => Err(PyValueError::new_err("the akappa flow needs tau")),
        (other, _) => Err(PyValueError::new_err(format!("unknown flow '{other}'"))),
    }
}

#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory(flows::Trajectory);

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times.clone()
    }

    /// Per snapshot: M, H, then A at each probe.
    fn conserved(&self) -> Vec<(C64, C64, Vec<C64>)> {
        self.0
            .conserved
            .iter()
            .map(|c| (c.m, c.h_dnls, c.a_values.iter().map(|a| a.2).collect()))
            .collect()
    }

    fn state(&self, index: usize) -> PyResult<PyFieldPair> {
        self.0
            .states
            .get(index)
            .cloned()
            .map(PyFieldPair)
            .ok_or_else(|| PyValueError::new_err(format!("snapshot {index} out of range")))
    }

    fn __len__(&self) -> usize {
        self.0.states.len()
    }
}

#[pyfunction]
#[pyo3(signature = (pair, t_final, dt, flow = "dnls", tau = None, stride = 1, probes = Vec::new()))]
fn evolve(
    pair: &PyFieldPair,
    t_final: f64,
    dt: f64,
    flow: &str,
    tau: Option<f64>,
    stride: usize,
    probes: Vec<PySpectral>,
) -> PyResult<PyTrajectory> {
    let opts = SnapshotOptions {
        stride,
        probes: probes.iter().map(|p| p.0).collect(),
    };
    flows::evolve(&pair.0, flow_of(flow, tau)?, t_final, dt, &opts)
        .map(PyTrajectory)
        .map_err(py_err)
}

/// Weak Lax commutator residual on seeded random smooth test fields.
#[pyfunction]
#[pyo3(signature = (pair, probe, flow = "dnls", tau = None, fields = 8, seed = 7))]
fn lax_residual(
    pair: &PyFieldPair,
    probe: &PySpectral,
    flow: &str,
    tau: Option<f64>,
    fields: usize,
    seed: u64,
) -> PyResult<f64> {
    let f = flows::random_test_fields(pair.0.grid(), fields, seed);
    flows::lax_residual(&pair.0, flow_of(flow, tau)?, probe.0, &f).map_err(py_err)
}

/// Identity suite with default tolerances; returns the JSON report.
#[pyfunction]
fn verify_identities(pair: &PyFieldPair, sp_a: &PySpectral, sp_b: &PySpectral) -> PyResult<String> {
    let rep =
        identity_suite(&pair.0, sp_a.0, sp_b.0, &Tolerances::defaults(), "").map_err(py_err)?;
    rep.to_json().map_err(py_err)
}

/// Runs a subcommand pipeline on a scenario file; returns (pass, report JSON).
#[pyfunction]
#[pyo3(signature = (command, config, out = None))]
fn run_scenario(command: &str, config: PathBuf, out: Option<PathBuf>) -> PyResult<(bool, String)> {
    let mut cfg = ScenarioConfig::from_file(&config).map_err(py_err)?;
    if out.is_some() {
        cfg.apply_overrides(&[], None, None, out, None)
            .map_err(py_err)?;
    }
    let outcome = match command {
        "greens" => scenario::run_greens(&cfg),
        "invariants" => scenario::run_invariants(&cfg),
        "evolve" => scenario::run_evolve(&cfg),
        "verify" => scenario::run_verify(&cfg),
        "sweep" => scenario::run_sweep(&cfg).map(|(o, _)| o),
        other => return Err(PyValueError::new_err(format!("unknown command '{other}'"))),
    }
    .map_err(py_err)?;
    Ok((
        outcome.report.pass,
        outcome.report.to_json().map_err(py_err)?,
    ))
}

#[pymodule]
fn dnls_green_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PySpectral>()?;
    m.add_class::<PyFieldPair>()?;
    m.add_class::<PyGreens>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(diagonal_greens, m)?)?;
    m.add_function(wrap_pyfunction!(a_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(a_log_det, m)?)?;
    m.add_function(wrap_pyfunction!(conserved, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(lax_residual, m)?)?;
    m.add_function(wrap_pyfunction!(verify_identities, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
