//! Python module `swipt_relay`.
//!
//! Scalar helpers take and return floats. Simulation results come back as
//! plain dicts and lists, shaped like the JSON the core types serialise to.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use swipt_core::channel::LinkError;
use swipt_core::{
    Candidate, FadingSample, ForwardLink, Harness, HarvestParams, LinkBudget, PolicyKind, ReplayVerdict, Schedule,
    SimConfig as CoreConfig, SimError, SlotTrace, SweepSpec, TrialOptions,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn sim_err(e: SimError) -> PyErr {
    match e {
        SimError::Config(c) => value_err(c),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn gain(g: f64) -> PyResult<FadingSample> {
    FadingSample::new(g).ok_or_else(|| value_err(format!("gain must be finite and non-negative, got {g}")))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn view(batteries: &[f64], available: Option<Vec<bool>>) -> PyResult<Vec<Candidate>> {
    let available = available.unwrap_or_else(|| vec![true; batteries.len()]);
    if available.len() != batteries.len() {
        return Err(value_err("available must have one entry per battery"));
    }
    Ok(batteries
        .iter()
        .zip(available)
        .enumerate()
        .map(|(id, (&battery, available))| Candidate { id, battery, available })
        .collect())
}

fn harness(threads: Option<usize>, z: f64) -> PyResult<Harness> {
    if !(z.is_finite() && z > 0.0) {
        return Err(value_err(format!("z must be positive, got {z}")));
    }
    Ok(Harness { threads, z })
}

/// Scenario parameters. Powers are in dBW.
#[pyclass(name = "SimConfig", module = "swipt_relay", skip_from_py_object)]
#[derive(Clone)]
pub struct SimConfig {
    inner: CoreConfig,
}

#[pymethods]
impl SimConfig {
    #[new]
    #[pyo3(signature = (
        policy = "srs", n = 5, m = None, rate = 1.0, eta = 0.5, ps_dbw = 10.0, pr_dbw = 10.0,
        sigma2 = 1.0, distance = 1.0, slot_duration = 1.0, initial_energy = None,
        sense_threshold = 0.0, messages = 20_000, warmup = 0, trials = 1, seed = 1,
        schedule = "pipelined",
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        policy: &str,
        n: usize,
        m: Option<usize>,
        rate: f64,
        eta: f64,
        ps_dbw: f64,
        pr_dbw: f64,
        sigma2: f64,
        distance: f64,
        slot_duration: f64,
        initial_energy: Option<f64>,
        sense_threshold: f64,
        messages: usize,
        warmup: usize,
        trials: usize,
        seed: u64,
        schedule: &str,
    ) -> PyResult<Self> {
        let policy = match (policy.to_ascii_lowercase().as_str(), m) {
            ("srs", None) => PolicyKind::Srs,
            ("srs", Some(_)) => return Err(value_err("m: m requires the mrs policy")),
            ("mrs", Some(m)) => PolicyKind::Mrs { m },
            ("mrs", None) => return Err(value_err("m: m required for mrs")),
            (other, _) => return Err(value_err(format!("policy: unknown policy {other:?}"))),
        };
        let inner = CoreConfig {
            n_relays: n,
            policy,
            target_rate: rate,
            eta,
            source_power_dbw: ps_dbw,
            relay_power_dbw: pr_dbw,
            noise_var: sigma2,
            distance,
            slot_duration,
            initial_energy,
            sense_threshold,
            n_messages: messages,
            warmup_messages: warmup,
            n_trials: trials,
            seed,
            schedule: schedule.parse::<Schedule>().map_err(value_err)?,
        };
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn policy(&self) -> &'static str {
        self.inner.policy.name()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n_relays
    }

    #[getter]
    fn m(&self) -> Option<usize> {
        self.inner.policy.m()
    }

    #[getter]
    fn rate(&self) -> f64 {
        self.inner.target_rate
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn messages(&self) -> usize {
        self.inner.n_messages
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        let m = self.inner.policy.m().map_or(String::new(), |m| format!(", m={m}"));
        format!(
            "SimConfig(policy={:?}, n={}{m}, rate={}, eta={}, messages={}, seed={})",
            self.inner.policy.name(),
            self.inner.n_relays,
            self.inner.target_rate,
            self.inner.eta,
            self.inner.n_messages,
            self.inner.seed
        )
    }
}

#[pyfunction]
fn dbw_to_watts(dbw: f64) -> f64 {
    swipt_core::dbw_to_watts(dbw)
}

#[pyfunction]
#[pyo3(signature = (gain_sq, tx_power, noise_var = 1.0, distance = 1.0))]
fn link_rate(gain_sq: f64, tx_power: f64, noise_var: f64, distance: f64) -> PyResult<f64> {
    let budget = LinkBudget::new(tx_power, noise_var, distance).map_err(|e: LinkError| value_err(e))?;
    Ok(swipt_core::link_rate(gain(gain_sq)?, &budget))
}

/// Raises ValueError on a dead channel (zero gain, positive rate).
#[pyfunction]
#[pyo3(signature = (rate, gain_sq, noise_var = 1.0, distance = 1.0))]
fn inversion_power(rate: f64, gain_sq: f64, noise_var: f64, distance: f64) -> PyResult<f64> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(value_err(format!("rate must be non-negative, got {rate}")));
    }
    swipt_core::inversion_power(rate, gain(gain_sq)?, noise_var, distance)
        .map_err(|_| value_err("infinite power: channel gain is zero"))
}

#[pyfunction]
#[pyo3(signature = (gain_sq, eta, source_power, slot_duration = 1.0, distance = 1.0, sense_threshold = 0.0))]
fn harvest_amount(
    gain_sq: f64,
    eta: f64,
    source_power: f64,
    slot_duration: f64,
    distance: f64,
    sense_threshold: f64,
) -> PyResult<f64> {
    let params = HarvestParams { eta, slot_duration, source_power, distance, sense_threshold };
    params.validate().map_err(value_err)?;
    Ok(swipt_core::harvest_amount(gain(gain_sq)?, &params))
}

/// Relay ids are list positions.
#[pyfunction]
#[pyo3(signature = (batteries, fixed_cost, available = None))]
fn srs_select(batteries: Vec<f64>, fixed_cost: f64, available: Option<Vec<bool>>) -> PyResult<Option<usize>> {
    Ok(swipt_core::srs_select(&view(&batteries, available)?, fixed_cost))
}

#[pyfunction]
#[pyo3(signature = (batteries, m, available = None))]
fn mrs_preselect(batteries: Vec<f64>, m: usize, available: Option<Vec<bool>>) -> PyResult<Vec<usize>> {
    Ok(swipt_core::mrs_preselect(&view(&batteries, available)?, m))
}

/// Returns `(id, tx_power, cost)` of the chosen forwarder, or None.
#[pyfunction]
#[pyo3(signature = (decoded, batteries, dest_gains, rate, noise_var = 1.0, distance = 1.0, slot_duration = 1.0))]
fn mrs_final_select(
    decoded: Vec<usize>,
    batteries: Vec<f64>,
    dest_gains: Vec<f64>,
    rate: f64,
    noise_var: f64,
    distance: f64,
    slot_duration: f64,
) -> PyResult<Option<(usize, f64, f64)>> {
    if dest_gains.len() != batteries.len() {
        return Err(value_err("dest_gains must have one entry per battery"));
    }
    if let Some(&bad) = decoded.iter().find(|&&id| id >= batteries.len()) {
        return Err(value_err(format!("decoded id {bad} out of range")));
    }
    let gains = dest_gains.iter().map(|&g| gain(g)).collect::<PyResult<Vec<_>>>()?;
    let link = ForwardLink { target_rate: rate, noise_var, distance, slot_duration };
    let chosen = swipt_core::mrs_final_select(&decoded, &view(&batteries, None)?, &gains, &link);
    Ok(chosen.map(|f| (f.id, f.tx_power, f.cost)))
}

/// One trial. Returns `{"outcomes", "outages", "final_batteries"}` plus a
/// JSONL `"trace"` when requested.
#[pyfunction]
#[pyo3(signature = (config, trial = 0, audit = false, trace = false))]
fn run_trial<'py>(
    py: Python<'py>,
    config: PyRef<'py, SimConfig>,
    trial: u64,
    audit: bool,
    trace: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config.inner.clone();
    let run = py
        .detach(|| swipt_core::run_trial_with(&cfg, trial, TrialOptions { audit, trace }))
        .map_err(sim_err)?;
    let out = pyo3::types::PyDict::new(py);
    let outcomes: Vec<&str> = run.outcomes.iter().map(|o| o.outcome.name()).collect();
    out.set_item("outcomes", outcomes)?;
    out.set_item("outages", run.outages())?;
    out.set_item("final_batteries", run.final_batteries)?;
    if let Some(t) = run.trace {
        out.set_item("trace", t.to_jsonl())?;
    }
    Ok(out.into_any())
}

#[pyfunction]
#[pyo3(signature = (config, threads = None, z = 3.0))]
fn estimate_outage<'py>(
    py: Python<'py>,
    config: PyRef<'py, SimConfig>,
    threads: Option<usize>,
    z: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let h = harness(threads, z)?;
    let cfg = config.inner.clone();
    let est = py.detach(|| h.estimate(&cfg)).map_err(sim_err)?;
    to_py(py, &est)
}

/// Grid over the given axes; unset axes keep the base value.
#[pyfunction]
#[pyo3(signature = (config, rates = None, etas = None, ns = None, ms = None, crn = true, threads = None, z = 3.0))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    config: PyRef<'py, SimConfig>,
    rates: Option<Vec<f64>>,
    etas: Option<Vec<f64>>,
    ns: Option<Vec<usize>>,
    ms: Option<Vec<usize>>,
    crn: bool,
    threads: Option<usize>,
    z: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let h = harness(threads, z)?;
    let mut spec = SweepSpec::new(config.inner.clone()).common_random_numbers(crn);
    if let Some(r) = rates {
        spec = spec.rates(r);
    }
    if let Some(e) = etas {
        spec = spec.etas(e);
    }
    if let Some(n) = ns {
        spec = spec.n_relays(n);
    }
    if let Some(m) = ms {
        spec = spec.ms(m);
    }
    let points = py.detach(|| h.sweep(&spec)).map_err(sim_err)?;
    to_py(py, &points)
}

/// Scans M (default 1..=N) for an MRS scenario.
#[pyfunction]
#[pyo3(signature = (config, ms = None, threads = None, z = 3.0))]
fn optimize_m<'py>(
    py: Python<'py>,
    config: PyRef<'py, SimConfig>,
    ms: Option<Vec<usize>>,
    threads: Option<usize>,
    z: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let h = harness(threads, z)?;
    let cfg = config.inner.clone();
    let ms = ms.unwrap_or_else(|| (1..=cfg.n_relays).collect());
    let search = py.detach(|| h.optimize_m(&cfg, &ms)).map_err(sim_err)?;
    to_py(py, &search)
}

#[pyfunction]
#[pyo3(signature = (config, rates, threads = None, z = 3.0))]
fn compare_policies<'py>(
    py: Python<'py>,
    config: PyRef<'py, SimConfig>,
    rates: Vec<f64>,
    threads: Option<usize>,
    z: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let h = harness(threads, z)?;
    let cfg = config.inner.clone();
    let cmp = py.detach(|| h.compare(&cfg, &rates)).map_err(sim_err)?;
    to_py(py, &cmp)
}

/// Re-simulates a JSONL trace. Returns None when every slot matches,
/// otherwise the first diverging slot.
#[pyfunction]
fn replay(py: Python<'_>, trace: &str) -> PyResult<Option<usize>> {
    let trace = SlotTrace::read_jsonl(trace.as_bytes()).map_err(sim_err)?;
    Ok(match py.detach(|| swipt_core::replay_check(&trace)) {
        ReplayVerdict::Match => None,
        ReplayVerdict::Diverged { slot } => Some(slot),
    })
}

#[pymodule]
fn swipt_relay(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SimConfig>()?;
    m.add_function(wrap_pyfunction!(dbw_to_watts, m)?)?;
    m.add_function(wrap_pyfunction!(link_rate, m)?)?;
    m.add_function(wrap_pyfunction!(inversion_power, m)?)?;
    m.add_function(wrap_pyfunction!(harvest_amount, m)?)?;
    m.add_function(wrap_pyfunction!(srs_select, m)?)?;
    m.add_function(wrap_pyfunction!(mrs_preselect, m)?)?;
    m.add_function(wrap_pyfunction!(mrs_final_select, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_outage, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_m, m)?)?;
    m.add_function(wrap_pyfunction!(compare_policies, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    Ok(())
}
