//! Python bindings for the revrl workbench.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use revrl::envs::tabular::Kernel;
use revrl::envs::velocity_chain::COAST_ACTION;
use revrl::envs::{build_velocity_chain, make_env, EnvOverrides};
use revrl::harness::{evaluate_policy, parse_config, train_run};
use revrl::learner::{load_policy, save_policy};
use revrl::reversibility::{self as rev, ViolationReport, DEFAULT_TOLERANCE};
use revrl::rng::{streams, RngStream};
use revrl::{conjugate_state, Action, Environment, StateVector, Transition};

type State = (Vec<f64>, Vec<f64>);

/// Divergence surfaces as RuntimeError, everything else as ValueError.
fn py_err(e: revrl::Error) -> PyErr {
    if e.is_divergence() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn state(s: State) -> PyResult<StateVector> {
    StateVector::new(s.0, s.1).map_err(py_err)
}

fn split(s: StateVector) -> State {
    (s.config, s.velocity)
}

fn overrides(pairs: Vec<(String, f64)>) -> PyResult<EnvOverrides> {
    let mut o = EnvOverrides::default();
    for (key, value) in pairs {
        let slot = match key.as_str() {
            "mass" => &mut o.mass,
            "length" => &mut o.length,
            "gravity" => &mut o.gravity,
            "damping" => &mut o.damping,
            "torque_limit" => &mut o.torque_limit,
            "cart_mass" => &mut o.cart_mass,
            "pole_mass" => &mut o.pole_mass,
            "pole_length" => &mut o.pole_length,
            "track_halfwidth" => &mut o.track_halfwidth,
            "friction_multiplier" => &mut o.friction_multiplier,
            "force_limit" => &mut o.force_limit,
            "link_mass" => &mut o.link_mass,
            "link_length" => &mut o.link_length,
            "halfwidth" => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(PyValueError::new_err("env.halfwidth must be a non-negative integer"));
                }
                o.halfwidth = Some(value as usize);
                continue;
            }
            _ => return Err(PyValueError::new_err(format!("unknown override `env.{key}`"))),
        };
        *slot = Some(value);
    }
    Ok(o)
}

/// A registered environment. States are `(config, velocity)` tuples.
#[pyclass(name = "Env")]
struct PyEnv {
    inner: Box<dyn Environment>,
}

#[pymethods]
impl PyEnv {
    #[new]
    #[pyo3(signature = (name, overrides = Vec::new()))]
    fn new(name: &str, overrides: Vec<(String, f64)>) -> PyResult<Self> {
        let o = self::overrides(overrides)?;
        Ok(Self {
            inner: make_env(name, &o).map_err(py_err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.descriptor().name.clone()
    }

    #[getter]
    fn dof(&self) -> usize {
        self.inner.descriptor().dof
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.inner.descriptor().action_dim
    }

    #[getter]
    fn observation_dim(&self) -> usize {
        self.inner.observation_dim()
    }

    #[getter]
    fn episode_length(&self) -> usize {
        self.inner.descriptor().episode_length
    }

    #[getter]
    fn solve_threshold(&self) -> f64 {
        self.inner.descriptor().solve_threshold
    }

    /// Draws an initial state from the environment stream of `seed`.
    fn reset(&self, seed: u64) -> State {
        split(self.inner.reset(&mut RngStream::new(seed, streams::ENV)))
    }

    /// Returns `(next_state, reward, terminal)`.
    fn step(&self, s: State, action: Vec<f64>) -> PyResult<(State, f64, bool)> {
        let out = self.inner.step(&state(s)?, &Action(action)).map_err(py_err)?;
        Ok((split(out.next), out.reward, out.terminal))
    }

    fn reward(&self, s: State) -> PyResult<f64> {
        Ok(self.inner.reward(&state(s)?))
    }

    fn observe(&self, s: State) -> PyResult<Vec<f64>> {
        Ok(self.inner.observe(&state(s)?))
    }

    /// The time-reversal involution applied to one state.
    fn conjugate(&self, s: State) -> PyResult<State> {
        Ok(split(conjugate_state(&state(s)?, &self.inner.descriptor().involution).map_err(py_err)?))
    }

    /// Returns the conjugate `(state, action, reward, next_state, terminal)`.
    #[pyo3(signature = (s, action, next_state, reward = 0.0, terminal = false))]
    fn conjugate_transition(
        &self,
        s: State,
        action: Vec<f64>,
        next_state: State,
        reward: f64,
        terminal: bool,
    ) -> PyResult<(State, Vec<f64>, f64, State, bool)> {
        let t = Transition {
            state: state(s)?,
            action: Action(action),
            reward,
            next_state: state(next_state)?,
            terminal,
        };
        let c = revrl::conjugate_transition(&t, self.inner.as_ref()).map_err(py_err)?;
        Ok((split(c.state), c.action.0, c.reward, split(c.next_state), c.terminal))
    }

    /// Forward through `actions`, reverse through the conjugate, and report
    /// the distance to the start.
    fn round_trip_defect(&self, s: State, actions: Vec<Vec<f64>>) -> PyResult<f64> {
        let actions: Vec<Action> = actions.into_iter().map(Action).collect();
        revrl::dynamics::round_trip_defect(self.inner.as_ref(), &state(s)?, &actions).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Env({:?})", self.inner.descriptor().name)
    }
}

/// Outcome of one reversibility check. The witness is
/// `(state, action or None, next_state)`.
#[pyclass(name = "ViolationReport", get_all)]
struct PyViolationReport {
    max_violation: f64,
    witness: Option<(usize, Option<usize>, usize)>,
    tolerance: f64,
    passed: bool,
}

impl From<ViolationReport> for PyViolationReport {
    fn from(r: ViolationReport) -> Self {
        Self {
            max_violation: r.max_violation,
            witness: r.witness.map(|w| (w.state, w.action, w.next_state)),
            tolerance: r.tolerance,
            passed: r.passed,
        }
    }
}

#[pymethods]
impl PyViolationReport {
    fn __repr__(&self) -> String {
        format!(
            "ViolationReport(max_violation={:e}, passed={}, witness={:?})",
            self.max_violation, self.passed, self.witness
        )
    }
}

#[pyfunction]
fn stationary_distribution(kernel: Kernel) -> PyResult<Vec<f64>> {
    rev::stationary_distribution(&kernel).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (kernel, tolerance = DEFAULT_TOLERANCE))]
fn check_detailed_balance(kernel: Kernel, tolerance: f64) -> PyResult<PyViolationReport> {
    rev::check_detailed_balance(&kernel, tolerance).map(Into::into).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (kernel, involution, tolerance = DEFAULT_TOLERANCE))]
fn check_dynamic_reversibility(kernel: Kernel, involution: Vec<usize>, tolerance: f64) -> PyResult<PyViolationReport> {
    rev::check_dynamic_reversibility(&kernel, &involution, tolerance)
        .map(Into::into)
        .map_err(py_err)
}

/// The three CHECK lines of `revrl verify --env velocity-chain`.
#[pyfunction]
#[pyo3(signature = (halfwidth = 4, breaking = false))]
fn verify_velocity_chain(halfwidth: usize, breaking: bool) -> PyResult<Vec<String>> {
    let mdp = build_velocity_chain(halfwidth, breaking).map_err(py_err)?;
    Ok(rev::verify_tabular(&mdp, COAST_ACTION, DEFAULT_TOLERANCE)
        .iter()
        .map(ToString::to_string)
        .collect())
}

#[pyfunction]
fn capacity_for(total_env_steps: usize, tsda: bool) -> usize {
    revrl::tsda::capacity_for(total_env_steps, tsda)
}

/// A trained squashed-Gaussian policy.
#[pyclass(name = "Policy")]
struct PyPolicy {
    inner: revrl::learner::Policy,
}

#[pymethods]
impl PyPolicy {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_policy(path.as_ref()).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_policy(path.as_ref(), &self.inner).map_err(py_err)
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.inner.action_dim
    }

    /// `tanh` of the mean action.
    fn act(&self, obs: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.deterministic_action(&obs).map_err(py_err)
    }

    /// Mean and standard deviation of deterministic episodic return.
    #[pyo3(signature = (env, episodes = 10, seed = 0))]
    fn evaluate(&self, env: &PyEnv, episodes: usize, seed: u64) -> PyResult<(f64, f64)> {
        let mut rng = RngStream::new(seed, streams::EVAL);
        evaluate_policy(&self.inner, env.inner.as_ref(), episodes, &mut rng, false).map_err(py_err)
    }
}

/// One evaluation row of a training run.
#[pyclass(name = "MetricsRow", get_all)]
struct PyMetricsRow {
    run_id: String,
    seed: u64,
    env_step: usize,
    mean_return: f64,
    std_return: f64,
    wall_seconds: f64,
}

#[pyclass(name = "RunOutcome", get_all)]
struct PyRunOutcome {
    seed: u64,
    rows: Vec<Py<PyMetricsRow>>,
    env_steps: usize,
    buffer_len: usize,
    failure: Option<String>,
    policy: Py<PyPolicy>,
}

/// Trains one seed from TOML config text. The GIL is released while it runs.
#[pyfunction]
fn train(py: Python<'_>, config: &str, seed: u64) -> PyResult<PyRunOutcome> {
    let cfg = parse_config(config).map_err(py_err)?;
    let outcome = py.detach(|| train_run(&cfg, seed)).map_err(py_err)?;
    let rows = outcome
        .rows
        .into_iter()
        .map(|r| {
            Py::new(
                py,
                PyMetricsRow {
                    run_id: r.run_id,
                    seed: r.seed,
                    env_step: r.env_step,
                    mean_return: r.mean_return,
                    std_return: r.std_return,
                    wall_seconds: r.wall_seconds,
                },
            )
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok(PyRunOutcome {
        seed: outcome.seed,
        rows,
        env_steps: outcome.env_steps,
        buffer_len: outcome.buffer_len,
        failure: outcome.failure,
        policy: Py::new(py, PyPolicy { inner: outcome.policy })?,
    })
}

#[pymodule]
fn revrl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnv>()?;
    m.add_class::<PyPolicy>()?;
    m.add_class::<PyViolationReport>()?;
    m.add_class::<PyMetricsRow>()?;
    m.add_class::<PyRunOutcome>()?;
    m.add_function(wrap_pyfunction!(stationary_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(check_detailed_balance, m)?)?;
    m.add_function(wrap_pyfunction!(check_dynamic_reversibility, m)?)?;
    m.add_function(wrap_pyfunction!(verify_velocity_chain, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_for, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add("env_names", revrl::envs::env_names())?;
    Ok(())
}
