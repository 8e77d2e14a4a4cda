//! Monte Carlo outage estimation, parameter sweeps, the `M` search and
//! SRS/MRS comparisons.
//!
//! Every grid point runs on a seed fixed before any work is scheduled, so
//! results do not depend on the worker count or completion order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::derive_seed;
use crate::engine::{run_trial_with, SimConfig, TrialOptions};
use crate::error::{ConfigError, SimError};
use crate::selection::PolicyKind;

/// Binomial outage estimate with a normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub outages: usize,
    pub messages: usize,
    pub p_hat: f64,
    /// `z·sqrt(p̂(1−p̂)/messages)`.
    pub ci_halfwidth: f64,
}

impl OutageEstimate {
    pub fn from_counts(outages: usize, messages: usize, z: f64) -> Self {
        assert!(messages > 0 && outages <= messages);
        let p_hat = outages as f64 / messages as f64;
        let ci_halfwidth = z * (p_hat * (1.0 - p_hat) / messages as f64).sqrt();
        Self { outages, messages, p_hat, ci_halfwidth }
    }

    pub fn lower(&self) -> f64 {
        self.p_hat - self.ci_halfwidth
    }

    pub fn upper(&self) -> f64 {
        self.p_hat + self.ci_halfwidth
    }

    pub fn overlaps(&self, other: &OutageEstimate) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }

    /// Whole interval strictly below `other`'s.
    pub fn clearly_below(&self, other: &OutageEstimate) -> bool {
        self.upper() < other.lower()
    }

    /// `self ≤ other` up to the combined interval width.
    pub fn not_worse_than(&self, other: &OutageEstimate) -> bool {
        self.p_hat <= other.p_hat + self.ci_halfwidth.hypot(other.ci_halfwidth)
    }

    pub fn contains(&self, p: f64) -> bool {
        (p - self.p_hat).abs() <= self.ci_halfwidth
    }
}

/// Grid of configurations derived from a base configuration.
///
/// Axes left untouched hold the base value. Points are enumerated with the
/// rate varying fastest, then `m`, then `eta`, then `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: SimConfig,
    pub rates: Vec<f64>,
    pub etas: Vec<f64>,
    pub n_relays: Vec<usize>,
    /// Only meaningful under MRS.
    pub ms: Option<Vec<usize>>,
    /// Reuse one gain stream across the rate and `m` axes.
    pub common_random_numbers: bool,
}

impl SweepSpec {
    pub fn new(base: SimConfig) -> Self {
        Self {
            rates: vec![base.target_rate],
            etas: vec![base.eta],
            n_relays: vec![base.n_relays],
            ms: None,
            common_random_numbers: true,
            base,
        }
    }

    pub fn rates(mut self, rates: impl Into<Vec<f64>>) -> Self {
        self.rates = rates.into();
        self
    }

    pub fn etas(mut self, etas: impl Into<Vec<f64>>) -> Self {
        self.etas = etas.into();
        self
    }

    pub fn n_relays(mut self, ns: impl Into<Vec<usize>>) -> Self {
        self.n_relays = ns.into();
        self
    }

    pub fn ms(mut self, ms: impl Into<Vec<usize>>) -> Self {
        self.ms = Some(ms.into());
        self
    }

    pub fn common_random_numbers(mut self, on: bool) -> Self {
        self.common_random_numbers = on;
        self
    }

    /// Expands the grid into fully resolved, validated configurations.
    pub fn points(&self) -> Result<Vec<SimConfig>, ConfigError> {
        for (key, empty) in [
            ("rates", self.rates.is_empty()),
            ("etas", self.etas.is_empty()),
            ("ns", self.n_relays.is_empty()),
            ("ms", self.ms.as_ref().is_some_and(Vec::is_empty)),
        ] {
            if empty {
                return Err(ConfigError::new(key, "sweep axis must not be empty"));
            }
        }
        let ms: Vec<Option<usize>> = match (&self.ms, self.base.policy) {
            (Some(_), PolicyKind::Srs) => return Err(ConfigError::new("ms", "m axis requires the mrs policy")),
            (Some(ms), PolicyKind::Mrs { .. }) => ms.iter().map(|&m| Some(m)).collect(),
            (None, p) => vec![p.m()],
        };

        let mut out = Vec::with_capacity(self.n_relays.len() * self.etas.len() * ms.len() * self.rates.len());
        let mut flat = 0u64;
        for (ni, &n) in self.n_relays.iter().enumerate() {
            for (ei, &eta) in self.etas.iter().enumerate() {
                let crn_key = (ni * self.etas.len() + ei) as u64;
                for &m in &ms {
                    for &rate in &self.rates {
                        let seed = if self.common_random_numbers {
                            derive_seed(self.base.seed, crn_key)
                        } else {
                            derive_seed(self.base.seed, (1 << 62) | flat)
                        };
                        flat += 1;
                        let cfg = SimConfig {
                            n_relays: n,
                            eta,
                            target_rate: rate,
                            policy: m.map_or(PolicyKind::Srs, |m| PolicyKind::Mrs { m }),
                            seed,
                            ..self.base.clone()
                        };
                        cfg.validate()?;
                        out.push(cfg);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub config: SimConfig,
    pub estimate: OutageEstimate,
}

/// Result of scanning the MRS pre-selection size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MSearch {
    pub m_star: usize,
    pub table: Vec<SweepPoint>,
}

impl MSearch {
    pub fn best(&self) -> &SweepPoint {
        self.table.iter().find(|p| p.config.policy.m() == Some(self.m_star)).expect("m_star is in the table")
    }

    pub fn estimate_for(&self, m: usize) -> Option<&OutageEstimate> {
        self.table.iter().find(|p| p.config.policy.m() == Some(m)).map(|p| &p.estimate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub rate: f64,
    pub srs: SweepPoint,
    pub mrs_single: SweepPoint,
    pub mrs_best: SweepPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub rows: Vec<ComparisonRow>,
    /// MRS with one listener is no worse than SRS at every rate.
    pub mrs_single_beats_srs: bool,
    /// MRS with the best `M` is no worse than MRS with one listener.
    pub mrs_best_beats_single: bool,
}

/// Estimation settings shared by all harness operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harness {
    /// Worker threads; `None` uses rayon's global pool.
    pub threads: Option<usize>,
    /// Normal quantile of the confidence interval.
    pub z: f64,
}

impl Default for Harness {
    fn default() -> Self {
        Self { threads: None, z: 3.0 }
    }
}

impl Harness {
    pub fn with_threads(threads: usize) -> Self {
        Self { threads: Some(threads), ..Self::default() }
    }

    fn install<T: Send>(&self, work: impl FnOnce() -> T + Send) -> Result<T, SimError> {
        match self.threads {
            None => Ok(work()),
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t.max(1))
                    .build()
                    .map_err(|e| SimError::invariant(0, format!("thread pool: {e}")))?;
                Ok(pool.install(work))
            }
        }
    }

    fn estimate_in_pool(&self, config: &SimConfig) -> Result<OutageEstimate, SimError> {
        config.validate()?;
        let counts: Result<Vec<(usize, usize)>, SimError> = (0..config.n_trials as u64)
            .into_par_iter()
            .map(|trial| {
                let run = run_trial_with(config, trial, TrialOptions::default())?;
                Ok((run.outages(), run.outcomes.len()))
            })
            .collect();
        let (outages, messages) = counts?.into_iter().fold((0, 0), |(o, m), (a, b)| (o + a, m + b));
        if messages == 0 {
            return Err(ConfigError::new("warmup", "no messages left after warmup").into());
        }
        Ok(OutageEstimate::from_counts(outages, messages, self.z))
    }

    fn evaluate(&self, configs: Vec<SimConfig>) -> Result<Vec<SweepPoint>, SimError> {
        self.install(|| {
            configs
                .into_par_iter()
                .map(|config| Ok(SweepPoint { estimate: self.estimate_in_pool(&config)?, config }))
                .collect::<Result<Vec<_>, SimError>>()
        })?
    }

    pub fn estimate(&self, config: &SimConfig) -> Result<OutageEstimate, SimError> {
        self.install(|| self.estimate_in_pool(config))?
    }

    pub fn sweep(&self, spec: &SweepSpec) -> Result<Vec<SweepPoint>, SimError> {
        self.evaluate(spec.points()?)
    }

    /// Scans `ms` on the base seed and returns the `M` with the lowest
    /// outage estimate, preferring the smaller `M` on ties.
    pub fn optimize_m(&self, base: &SimConfig, ms: &[usize]) -> Result<MSearch, SimError> {
        if !matches!(base.policy, PolicyKind::Mrs { .. }) {
            return Err(ConfigError::new("policy", "the m search requires the mrs policy").into());
        }
        if ms.is_empty() {
            return Err(ConfigError::new("ms", "m range must not be empty").into());
        }
        let configs = ms
            .iter()
            .map(|&m| {
                let cfg = SimConfig { policy: PolicyKind::Mrs { m }, ..base.clone() };
                cfg.validate().map(|_| cfg)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let table = self.evaluate(configs)?;
        let m_star = best_m(&table);
        Ok(MSearch { m_star, table })
    }

    /// Runs SRS, MRS with `M = 1` and MRS with the best `M` in `1..=N` at
    /// every rate, all on the base seed.
    pub fn compare(&self, base: &SimConfig, rates: &[f64]) -> Result<PolicyComparison, SimError> {
        if rates.is_empty() {
            return Err(ConfigError::new("rates", "rate grid must not be empty").into());
        }
        let ms: Vec<usize> = (1..=base.n_relays).collect();
        let mut rows = Vec::with_capacity(rates.len());
        for &rate in rates {
            let at_rate = SimConfig { target_rate: rate, ..base.clone() };
            let srs_cfg = SimConfig { policy: PolicyKind::Srs, ..at_rate.clone() };
            let srs = SweepPoint { estimate: self.estimate(&srs_cfg)?, config: srs_cfg };
            let search = self.optimize_m(&SimConfig { policy: PolicyKind::Mrs { m: 1 }, ..at_rate }, &ms)?;
            rows.push(ComparisonRow {
                rate,
                srs,
                mrs_single: search.table[0].clone(),
                mrs_best: search.best().clone(),
            });
        }
        let mrs_single_beats_srs = rows.iter().all(|r| r.mrs_single.estimate.not_worse_than(&r.srs.estimate));
        let mrs_best_beats_single = rows.iter().all(|r| r.mrs_best.estimate.not_worse_than(&r.mrs_single.estimate));
        Ok(PolicyComparison { rows, mrs_single_beats_srs, mrs_best_beats_single })
    }
}

fn best_m(table: &[SweepPoint]) -> usize {
    let mut best: Option<(usize, usize, usize)> = None; // (outages, messages, m)
    for p in table {
        let m = p.config.policy.m().expect("mrs table");
        let (o, n) = (p.estimate.outages, p.estimate.messages);
        let better = match best {
            None => true,
            // o/n < bo/bn, compared without rounding
            Some((bo, bn, bm)) => {
                let lhs = o as u128 * bn as u128;
                let rhs = bo as u128 * n as u128;
                lhs < rhs || (lhs == rhs && m < bm)
            }
        };
        if better {
            best = Some((o, n, m));
        }
    }
    best.expect("non-empty table").2
}

pub fn estimate_outage(config: &SimConfig) -> Result<OutageEstimate, SimError> {
    Harness::default().estimate(config)
}

pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepPoint>, SimError> {
    Harness::default().sweep(spec)
}

pub fn optimize_m(base: &SimConfig, ms: &[usize]) -> Result<MSearch, SimError> {
    Harness::default().optimize_m(base, ms)
}

pub fn compare_policies(base: &SimConfig, rates: &[f64]) -> Result<PolicyComparison, SimError> {
    Harness::default().compare(base, rates)
}
