//! Python bindings for hjb-core: problem instances, network calculus, the
//! Hamiltonian network, the MLP estimator with freezing, and the oracles.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hjb_core::cli::network_model;
use hjb_core::hamnet::{build_hamiltonian_net, ProblemNets};
use hjb_core::mlp::{self, HamiltonianMode, MlpContext, MlpParams};
use hjb_core::netcalc::{self, io, NeuralNet};
use hjb_core::oracle::{self, OracleResult};
use hjb_core::problem::{families, ControlProblem, PsiSpec, TruncationLevel};

fn err(e: hjb_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn level(prob: &ControlProblem, r: Option<f64>) -> PyResult<TruncationLevel> {
    match r {
        Some(v) => TruncationLevel::new(v).map_err(err),
        None => prob.truncation_level().map_err(err),
    }
}

fn result_dict<'py>(py: Python<'py>, r: &OracleResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("oracle", &r.oracle)?;
    d.set_item("value", r.value)?;
    d.set_item("gradient", r.gradient.clone())?;
    d.set_item("stderr", r.stderr)?;
    d.set_item("grad_stderr", r.grad_stderr.clone())?;
    d.set_item("samples", r.samples)?;
    d.set_item("valid", r.valid)?;
    d.set_item("reason", r.reason.as_ref().map(|x| x.to_string()))?;
    Ok(d)
}

/// An HJB problem instance.
#[pyclass(name = "Problem", module = "hjb_py", frozen)]
struct PyProblem {
    inner: ControlProblem,
}

#[pymethods]
impl PyProblem {
    /// f₁ = 0, f₂ = I, γ = ½, box [−1, 1]^d, B-spline terminal cost with weight c.
    #[staticmethod]
    #[pyo3(signature = (d, c = 1.0))]
    fn p1(d: usize, c: f64) -> Self {
        Self { inner: families::p1(d, PsiSpec::Bspline { c }) }
    }

    #[staticmethod]
    fn heat(g: Vec<f64>) -> Self {
        Self { inner: families::heat(g) }
    }

    #[staticmethod]
    #[pyo3(signature = (d, c = 2.0))]
    fn cole_hopf(d: usize, c: f64) -> Self {
        Self { inner: families::cole_hopf(d, c) }
    }

    #[staticmethod]
    fn drift() -> Self {
        Self { inner: families::drift() }
    }

    #[staticmethod]
    fn timevar() -> Self {
        Self { inner: families::timevar() }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ControlProblem::from_toml_str(text).map(|inner| Self { inner }).map_err(err)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(err)
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.family.clone()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn dbar(&self) -> usize {
        self.inner.dbar
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn t_f(&self) -> f64 {
        self.inner.t_f
    }

    fn truncation_level(&self) -> PyResult<f64> {
        self.inner.truncation_level().map(|r| r.value()).map_err(err)
    }

    fn hamiltonian(&self, t: f64, x: Vec<f64>, p: Vec<f64>) -> PyResult<f64> {
        self.inner.hamiltonian(t, &x, &p).map_err(err)
    }

    #[pyo3(signature = (t, x, p, r = None))]
    fn truncated_hamiltonian(&self, t: f64, x: Vec<f64>, p: Vec<f64>, r: Option<f64>) -> PyResult<f64> {
        self.inner.truncated_hamiltonian(level(&self.inner, r)?, t, &x, &p).map_err(err)
    }

    #[pyo3(signature = (t, x, p, grid_n = 10_000))]
    fn brute_force_hamiltonian(&self, t: f64, x: Vec<f64>, p: Vec<f64>, grid_n: usize) -> PyResult<f64> {
        self.inner.brute_force_hamiltonian(t, &x, &p, grid_n).map_err(err)
    }

    fn optimal_control(&self, t: f64, x: Vec<f64>, p: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.optimal_control(t, &x, &p).map_err(err)
    }

    fn psi(&self, x: Vec<f64>) -> f64 {
        self.inner.psi_value(&x)
    }

    fn __repr__(&self) -> String {
        format!("Problem(family={:?}, d={}, dbar={})", self.inner.family, self.inner.d, self.inner.dbar)
    }
}

/// A feed-forward network with ReLU, ReCU or linear layers.
#[pyclass(name = "Network", module = "hjb_py", frozen)]
struct PyNetwork {
    inner: NeuralNet,
}

fn wrap(r: hjb_core::Result<NeuralNet>) -> PyResult<PyNetwork> {
    r.map(|inner| PyNetwork { inner }).map_err(err)
}

#[pymethods]
impl PyNetwork {
    fn realize(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.realize(&x).map_err(err)
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn to_json(&self) -> String {
        io::to_json_string(&self.inner)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        wrap(io::from_json_str(text))
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        io::save(&self.inner, &path).map_err(err)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        wrap(io::load(&path))
    }

    #[staticmethod]
    fn sq(m: usize) -> PyResult<Self> {
        wrap(netcalc::sq_net(m))
    }

    #[staticmethod]
    fn prod(range: f64, delta: f64) -> PyResult<Self> {
        wrap(netcalc::prod_net(range, delta))
    }

    #[staticmethod]
    fn matvec(m: usize, n: usize, range: f64, delta: f64) -> PyResult<Self> {
        wrap(netcalc::matvec_net(m, n, range, delta))
    }

    #[staticmethod]
    fn clip(r: f64, n: usize) -> PyResult<Self> {
        wrap(netcalc::clip_net(r, n))
    }

    #[staticmethod]
    fn clamp(lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Self> {
        wrap(netcalc::clamp_net(&lo, &hi))
    }

    /// The network computing `self(inner(x))`.
    fn compose(&self, inner: &PyNetwork) -> PyResult<Self> {
        wrap(netcalc::compose(&self.inner, &inner.inner))
    }

    #[staticmethod]
    fn parallelize(nets: Vec<PyRef<'_, PyNetwork>>) -> PyResult<Self> {
        let refs: Vec<&NeuralNet> = nets.iter().map(|n| &n.inner).collect();
        wrap(netcalc::parallelize(&refs))
    }

    #[pyo3(signature = (other, w_self = 1.0, w_other = 1.0))]
    fn add(&self, other: &PyNetwork, w_self: f64, w_other: f64) -> PyResult<Self> {
        wrap(netcalc::add(&self.inner, &other.inner, w_self, w_other))
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(input={}, output={}, depth={}, size={})",
            self.inner.input_dim(),
            self.inner.output_dim(),
            self.inner.depth(),
            self.inner.size()
        )
    }
}

/// A finite-difference solution on a 1-D grid, queried at (t, x).
#[pyclass(name = "FdSolution", module = "hjb_py", frozen)]
struct PyFdSolution {
    inner: oracle::FdSolution,
}

#[pymethods]
impl PyFdSolution {
    fn query<'py>(&self, py: Python<'py>, t: f64, x: f64) -> PyResult<Bound<'py, PyDict>> {
        result_dict(py, &self.inner.query(t, x).map_err(err)?)
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    #[getter]
    fn safe_interval(&self) -> (f64, f64) {
        self.inner.safe_interval()
    }
}

/// The Hamiltonian network on inputs (t, x, p) with tolerance `delta`.
#[pyfunction]
#[pyo3(signature = (problem, delta, r = None))]
fn hamiltonian_net(problem: &PyProblem, delta: f64, r: Option<f64>) -> PyResult<PyNetwork> {
    let prob = &problem.inner;
    let nets = ProblemNets::exact(prob).map_err(err)?;
    let h = build_hamiltonian_net(&nets, prob, level(prob, r)?, delta).map_err(err)?;
    Ok(PyNetwork { inner: h.net })
}

fn mlp_params(levels: usize, branching: usize, alpha_time: f64, seed: u64, network: bool) -> MlpParams {
    let h_mode = if network { HamiltonianMode::Network } else { HamiltonianMode::ExactTruncated };
    MlpParams { levels, branching, alpha_time, seed, h_mode }
}

/// One MLP estimate; returns (value, gradient). With `delta` set, the
/// Hamiltonian and terminal cost are evaluated through their networks.
#[pyfunction]
#[pyo3(signature = (problem, x, levels, branching, t = 0.0, alpha_time = 0.5, seed = 0, delta = None))]
#[allow(clippy::too_many_arguments)]
fn mlp_estimate(
    problem: &PyProblem,
    x: Vec<f64>,
    levels: usize,
    branching: usize,
    t: f64,
    alpha_time: f64,
    seed: u64,
    delta: Option<f64>,
) -> PyResult<(f64, Vec<f64>)> {
    let prob = &problem.inner;
    let r = prob.truncation_level().map_err(err)?;
    let params = mlp_params(levels, branching, alpha_time, seed, delta.is_some());
    let ctx = match delta {
        Some(dl) => MlpContext::with_networks(prob, r, network_model(prob, dl).map_err(err)?).map_err(err)?,
        None => MlpContext::exact(prob, r),
    };
    let e = mlp::mlp_estimate(&ctx, &params, t, &x).map_err(err)?;
    Ok((e.value, e.gradient))
}

/// The sampled estimator at time t as one network x ↦ (value, gradient).
#[pyfunction]
#[pyo3(signature = (problem, levels, branching, delta, t = 0.0, alpha_time = 0.5, seed = 0))]
fn freeze(
    problem: &PyProblem,
    levels: usize,
    branching: usize,
    delta: f64,
    t: f64,
    alpha_time: f64,
    seed: u64,
) -> PyResult<PyNetwork> {
    let prob = &problem.inner;
    let r = prob.truncation_level().map_err(err)?;
    let ctx = MlpContext::with_networks(prob, r, network_model(prob, delta).map_err(err)?).map_err(err)?;
    wrap(mlp::freeze_to_net(&ctx, &mlp_params(levels, branching, alpha_time, seed, true), t))
}

#[pyfunction]
fn count_indices(n: u32, m: u64) -> PyResult<u128> {
    mlp::count_indices(n, m).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (problem, x, t = 0.0, samples = 100_000, seed = 0))]
fn cole_hopf_value<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    x: Vec<f64>,
    t: f64,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    result_dict(py, &oracle::cole_hopf_value(&problem.inner, t, &x, samples, seed).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (problem, x, t = 0.0, samples = 100_000, seed = 0))]
fn heat_value<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    x: Vec<f64>,
    t: f64,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    result_dict(py, &oracle::heat_value(&problem.inner, t, &x, samples, seed).map_err(err)?)
}

/// Solves a d = 1 problem on [x_lo, x_hi]; defaults to a grid around [−2, 2].
#[pyfunction]
#[pyo3(signature = (problem, nx = None, nt = None, x_lo = None, x_hi = None))]
fn fd_solve_1d(
    problem: &PyProblem,
    nx: Option<usize>,
    nt: Option<usize>,
    x_lo: Option<f64>,
    x_hi: Option<f64>,
) -> PyResult<PyFdSolution> {
    let mut grid = oracle::FdGrid::around(&problem.inner, -2.0, 2.0);
    if let Some(v) = nx {
        grid.nx = v;
    }
    grid.nt = nt.or(grid.nt);
    grid.x_lo = x_lo.unwrap_or(grid.x_lo);
    grid.x_hi = x_hi.unwrap_or(grid.x_hi);
    oracle::fd_solve_1d(&problem.inner, &grid).map(|inner| PyFdSolution { inner }).map_err(err)
}

/// Returns (pass, reason) for the Cole–Hopf clamp condition.
#[pyfunction]
#[pyo3(signature = (problem, r = None))]
fn oracle_validity_check(problem: &PyProblem, r: Option<f64>) -> PyResult<(bool, Option<String>)> {
    let c = oracle::oracle_validity_check(&problem.inner, level(&problem.inner, r)?);
    Ok((c.pass, c.reason.map(|x| x.to_string())))
}

#[pymodule]
fn hjb_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyFdSolution>()?;
    m.add_function(wrap_pyfunction!(hamiltonian_net, m)?)?;
    m.add_function(wrap_pyfunction!(mlp_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(freeze, m)?)?;
    m.add_function(wrap_pyfunction!(count_indices, m)?)?;
    m.add_function(wrap_pyfunction!(cole_hopf_value, m)?)?;
    m.add_function(wrap_pyfunction!(heat_value, m)?)?;
    m.add_function(wrap_pyfunction!(fd_solve_1d, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_validity_check, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
