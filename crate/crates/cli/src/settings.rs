//! Flat `key = value` settings: defaults ← config file ← flags.

use std::collections::BTreeMap;
use std::str::FromStr;

use swipt_core::{PolicyKind, Schedule, SimConfig, SweepSpec};

use crate::CliError;

/// Keys describing one scenario.
pub const SCENARIO_KEYS: &[&str] = &[
    "policy",
    "n",
    "m",
    "eta",
    "rate",
    "ps_dbw",
    "pr_dbw",
    "sigma2",
    "distance",
    "slot_duration",
    "initial_energy",
    "sense_threshold",
    "messages",
    "warmup",
    "trials",
    "seed",
    "schedule",
];

/// Grid keys, each accepted only by some commands.
pub const AXIS_KEYS: &[&str] = &["rates", "etas", "ns", "ms", "crn"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Sweep,
    OptM,
    Compare,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::Sweep => "sweep",
            Mode::OptM => "opt-m",
            Mode::Compare => "compare",
        }
    }

    fn accepts(self, key: &str) -> bool {
        match key {
            "rates" => matches!(self, Mode::Sweep | Mode::Compare),
            "etas" | "ns" | "crn" => self == Mode::Sweep,
            "ms" => matches!(self, Mode::Sweep | Mode::OptM),
            "policy" | "m" => matches!(self, Mode::Run | Mode::Sweep | Mode::OptM),
            _ => true,
        }
    }
}

fn canonical(key: &str) -> String {
    key.trim().replace('-', "_")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn from_map(map: BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut s = Settings::default();
        for (k, v) in map {
            s.set(&k, v)?;
        }
        Ok(s)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
            s.set(k, v.trim().to_string())?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: String) -> Result<(), CliError> {
        let key = canonical(key);
        if !SCENARIO_KEYS.contains(&key.as_str()) && !AXIS_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("unknown key `{key}`")));
        }
        self.0.insert(key, value);
        Ok(())
    }

    /// Later settings win.
    pub fn merge(&mut self, other: Settings) {
        self.0.extend(other.0);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.0
    }

    fn parsed<T: FromStr>(&self, key: &'static str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::invalid(key, format!("cannot parse {v:?}: {e}"))))
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &'static str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.get(key) else { return Ok(None) };
        let items = v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|e| CliError::invalid(key, format!("cannot parse {s:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if items.is_empty() {
            return Err(CliError::invalid(key, "list must not be empty"));
        }
        Ok(Some(items))
    }

    /// Resolves the scenario for `mode`, validating every key.
    pub fn scenario(&self, mode: Mode) -> Result<SimConfig, CliError> {
        for key in self.0.keys() {
            if !mode.accepts(key) {
                return Err(CliError::invalid(key, format!("not used by `{}`", mode.name())));
            }
        }
        let d = SimConfig::default();
        let n = self.parsed("n")?.unwrap_or(d.n_relays);
        let m: Option<usize> = self.parsed("m")?;
        let has_m_axis = self.get("ms").is_some();
        let policy_name = self.get("policy").map(str::to_ascii_lowercase);
        let policy = match (mode, policy_name.as_deref()) {
            (Mode::OptM, None | Some("mrs")) => {
                if m.is_some() {
                    return Err(CliError::invalid("m", "opt-m searches m itself; restrict it with ms"));
                }
                PolicyKind::Mrs { m: 1 }
            }
            (Mode::OptM, Some(_)) => return Err(CliError::invalid("policy", "opt-m requires mrs")),
            (Mode::Compare, _) => PolicyKind::Srs,
            (_, None | Some("srs")) => {
                if m.is_some() || has_m_axis {
                    return Err(CliError::invalid("m", "m requires the mrs policy"));
                }
                PolicyKind::Srs
            }
            (_, Some("mrs")) => match (m, has_m_axis && mode == Mode::Sweep) {
                (Some(_), true) => return Err(CliError::invalid("m", "give either m or ms, not both")),
                (Some(m), false) => PolicyKind::Mrs { m },
                (None, true) => PolicyKind::Mrs { m: 1 },
                (None, false) => return Err(CliError::invalid("m", "m required for mrs")),
            },
            (_, Some(other)) => {
                return Err(CliError::invalid("policy", format!("unknown policy {other:?} (expected srs or mrs)")))
            }
        };
        let initial_energy = match self.get("initial_energy") {
            None | Some("auto") => None,
            Some(_) => self.parsed("initial_energy")?,
        };
        let schedule = match self.get("schedule") {
            None => d.schedule,
            Some(s) => Schedule::from_str(s).map_err(|e| CliError::invalid("schedule", e))?,
        };
        let cfg = SimConfig {
            n_relays: n,
            policy,
            target_rate: self.parsed("rate")?.unwrap_or(d.target_rate),
            eta: self.parsed("eta")?.unwrap_or(d.eta),
            source_power_dbw: self.parsed("ps_dbw")?.unwrap_or(d.source_power_dbw),
            relay_power_dbw: self.parsed("pr_dbw")?.unwrap_or(d.relay_power_dbw),
            noise_var: self.parsed("sigma2")?.unwrap_or(d.noise_var),
            distance: self.parsed("distance")?.unwrap_or(d.distance),
            slot_duration: self.parsed("slot_duration")?.unwrap_or(d.slot_duration),
            initial_energy,
            sense_threshold: self.parsed("sense_threshold")?.unwrap_or(d.sense_threshold),
            n_messages: self.parsed("messages")?.unwrap_or(d.n_messages),
            warmup_messages: self.parsed("warmup")?.unwrap_or(d.warmup_messages),
            n_trials: self.parsed("trials")?.unwrap_or(d.n_trials),
            seed: self.parsed("seed")?.unwrap_or(d.seed),
            schedule,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, CliError> {
        let base = self.scenario(Mode::Sweep)?;
        let mut spec = SweepSpec::new(base);
        if let Some(r) = self.list("rates")? {
            spec = spec.rates(r);
        }
        if let Some(e) = self.list("etas")? {
            spec = spec.etas(e);
        }
        if let Some(n) = self.list("ns")? {
            spec = spec.n_relays(n);
        }
        if let Some(m) = self.list("ms")? {
            spec = spec.ms(m);
        }
        if let Some(crn) = self.parsed::<bool>("crn")? {
            spec = spec.common_random_numbers(crn);
        }
        spec.points()?;
        Ok(spec)
    }

    pub fn rates(&self) -> Result<Option<Vec<f64>>, CliError> {
        self.list("rates")
    }

    pub fn ms(&self) -> Result<Option<Vec<usize>>, CliError> {
        self.list("ms")
    }
}
