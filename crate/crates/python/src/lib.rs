//! Python bindings: pulse simulation and optimisation, decomposition
//! bookkeeping, power-law fits and the Bacon-Shor QEC cycle.
//!
//! Composite results come back as plain dicts (built from the core crate's
//! serde representation).

use std::collections::BTreeSet;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use rydion::bacon_shor::{build_qec_cycle, ChainLayout, CycleOptions, LogicalState, QecCycle};
use rydion::config::RunConfig;
use rydion::evolve::{default_steps, evolve_plus};
use rydion::metrics::{self, analyze, GateKind};
use rydion::model::{PulseParams, SystemParams};
use rydion::optimize::{optimize_gate, GateSearch};
use rydion::{ft, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Parse { .. } | Error::InsufficientPoints(_) | Error::Connectivity(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Serialize through JSON into native Python objects.
fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_kind(kind: &str) -> PyResult<GateKind> {
    serde_json::from_value(serde_json::Value::String(kind.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown gate kind `{kind}`")))
}

fn parse_state(state: &str) -> PyResult<LogicalState> {
    state.parse().map_err(to_py)
}

/// Pulse amplitudes `(Ω0, δ0, Δ0)` in units of `V`.
#[pyclass(name = "PulseParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPulseParams(PulseParams);

#[pymethods]
impl PyPulseParams {
    #[new]
    fn new(omega0: f64, delta0: f64, big_delta0: f64) -> Self {
        Self(PulseParams::new(omega0, delta0, big_delta0))
    }

    #[getter]
    fn omega0(&self) -> f64 {
        self.0.omega0
    }

    #[getter]
    fn delta0(&self) -> f64 {
        self.0.delta0
    }

    #[getter]
    fn big_delta0(&self) -> f64 {
        self.0.big_delta0
    }

    fn __repr__(&self) -> String {
        format!(
            "PulseParams(omega0={}, delta0={}, big_delta0={})",
            self.0.omega0, self.0.delta0, self.0.big_delta0
        )
    }
}

/// Gate time, microwave dressing, decay rate and interaction ratio.
#[pyclass(name = "SystemParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySystemParams(SystemParams);

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (tau, omega_mw = 20.0, gamma = 0.0, alpha = 0.125))]
    fn new(tau: f64, omega_mw: f64, gamma: f64, alpha: f64) -> PyResult<Self> {
        let sys = SystemParams::new(tau, omega_mw, gamma).with_alpha(alpha);
        sys.validate().map_err(to_py)?;
        Ok(Self(sys))
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    fn __repr__(&self) -> String {
        format!(
            "SystemParams(tau={}, omega_mw={}, gamma={}, alpha={})",
            self.0.tau, self.0.omega_mw, self.0.gamma, self.0.alpha
        )
    }
}

/// Evolve `|+++>` under the pulse and return the error breakdown and outcome.
#[pyfunction]
#[pyo3(signature = (pulse, system, kind = "ccz"))]
fn simulate<'py>(
    py: Python<'py>,
    pulse: &PyPulseParams,
    system: &PySystemParams,
    kind: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let kind = parse_kind(kind)?;
    let (p, sys) = (pulse.0, system.0);
    let (outcome, errors) = py
        .detach(|| {
            let tr = evolve_plus(&p, &sys, default_steps(sys.tau))?;
            analyze(&tr, kind, sys.gamma)
        })
        .map_err(to_py)?;
    to_object(py, &serde_json::json!({ "errors": errors, "outcome": outcome }))
}

/// Differential-evolution search over the pulse parameters.
#[pyfunction]
#[pyo3(signature = (system, generations = 300, starts = 3, population = 45, seed = 0, kind = "ccz"))]
fn optimize<'py>(
    py: Python<'py>,
    system: &PySystemParams,
    generations: usize,
    starts: usize,
    population: usize,
    seed: u64,
    kind: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mut search = GateSearch {
        kind: parse_kind(kind)?,
        starts,
        ..GateSearch::default()
    };
    search.de.max_generations = generations;
    search.de.population_size = population;
    search.de.seed = seed;
    search.de.validate().map_err(to_py)?;
    let sys = system.0;
    let best = py.detach(|| optimize_gate(&sys, &search)).map_err(to_py)?;
    to_object(py, &best)
}

/// `(fidelity, duration_us)` of a decomposition into `(fidelity, duration_us)`
/// gates plus `sq_layers` single-qubit layers.
#[pyfunction]
#[pyo3(signature = (gates, sq_layers, sq_time = metrics::SINGLE_QUBIT_LAYER_US))]
fn compose_decomposition(gates: Vec<(f64, f64)>, sq_layers: usize, sq_time: f64) -> PyResult<(f64, f64)> {
    metrics::compose_decomposition(&gates, sq_layers, sq_time).map_err(to_py)
}

/// Least-squares fit of `p = C λ^α` in log-log space.
#[pyfunction]
#[pyo3(signature = (lambdas, p, exclude_largest = 0))]
fn fit_power_law<'py>(
    py: Python<'py>,
    lambdas: Vec<f64>,
    p: Vec<f64>,
    exclude_largest: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let fit = ft::fit_power_law(&lambdas, &p, exclude_largest).map_err(to_py)?;
    to_object(py, &fit)
}

#[pyfunction]
#[pyo3(signature = (k, n, z = 1.96))]
fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    ft::wilson_interval(k, n, z)
}

/// The default run configuration as JSON.
#[pyfunction]
fn default_config() -> String {
    RunConfig::default().to_json()
}

/// Parse and validate a JSON run configuration; returns it normalised.
#[pyfunction]
fn validate_config(text: &str) -> PyResult<String> {
    Ok(RunConfig::from_json(text).map_err(to_py)?.to_json())
}

/// A routed Bacon-Shor syndrome-extraction and correction cycle.
#[pyclass(name = "QecCycle", frozen)]
struct PyQecCycle(QecCycle);

#[pymethods]
impl PyQecCycle {
    #[new]
    #[pyo3(signature = (layout = None, negative_control = false, relaxed = None))]
    fn new(layout: Option<&str>, negative_control: bool, relaxed: Option<Vec<usize>>) -> PyResult<Self> {
        let layout = match layout {
            Some(s) => ChainLayout::parse(s).map_err(to_py)?,
            None => ChainLayout::default(),
        };
        let options = CycleOptions {
            relaxed: relaxed.unwrap_or_default().into_iter().collect::<BTreeSet<_>>(),
            negative_control,
        };
        Ok(Self(build_qec_cycle(&layout, &options).map_err(to_py)?))
    }

    #[getter]
    fn cnot_count(&self) -> usize {
        self.0.cnot_count()
    }

    #[getter]
    fn candidate_swaps(&self) -> usize {
        self.0.candidate_swaps()
    }

    #[getter]
    fn ft_swaps(&self) -> usize {
        self.0.ft_swaps()
    }

    #[getter]
    fn n_ops(&self) -> usize {
        self.0.circuit.ops.len()
    }

    /// Circuit in the line-based text format.
    fn to_text(&self) -> String {
        self.0.circuit.to_text()
    }

    /// Logical failure probability of the noiseless cycle ("zero" or "plus").
    fn noiseless_failure(&self, py: Python<'_>, state: &str) -> PyResult<f64> {
        let st = parse_state(state)?;
        let c = &self.0;
        py.detach(|| {
            let out = c.circuit.run(&c.initial_state(st))?;
            Ok(c.logical_failure(out.amps(), st))
        })
        .map_err(to_py)
    }

    /// Exhaustive single-fault scan; slow (minutes) on the full cycle.
    fn single_fault_scan<'py>(&self, py: Python<'py>, state: &str) -> PyResult<Bound<'py, PyAny>> {
        let st = parse_state(state)?;
        let c = &self.0;
        let report = py.detach(|| ft::single_fault_scan(c, st)).map_err(to_py)?;
        to_object(py, &report)
    }

    fn __repr__(&self) -> String {
        format!(
            "QecCycle(ops={}, cnots={}, ft_swaps={})",
            self.0.circuit.ops.len(),
            self.0.cnot_count(),
            self.0.ft_swaps()
        )
    }
}

#[pymodule]
pub fn rydion_py(_py: Python, m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPulseParams>()?;
    m.add_class::<PySystemParams>()?;
    m.add_class::<PyQecCycle>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(compose_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    Ok(())
}
