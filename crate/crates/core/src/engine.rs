//! Slot-by-slot simulation of the two-hop relay network.
//!
//! Each slot runs four steps in a fixed order:
//!
//! 1. **forward**: the relay chosen for the previous message transmits to the
//!    destination (SRS at fixed power; MRS picks the forwarder now, from the
//!    relays that decoded, using the freshly drawn relay→destination gains);
//! 2. **designate**: listeners for the new message are picked among relays
//!    that are not transmitting;
//! 3. **broadcast**: the source transmits; listeners try to decode and every
//!    idle relay harvests;
//! 4. **advance**: statuses reset and the pending forward carries over.
//!
//! In [`Schedule::Pipelined`] the source broadcasts every slot, so the
//! forwarder of message `t−1` misses broadcast `t`. In [`Schedule::Framed`]
//! broadcast and forward alternate, one message per two slots.
//!
//! For common random numbers, every slot draws one source→relay and one
//! relay→destination gain per relay whether or not the slot uses them.

use serde::{Deserialize, Serialize};

use crate::channel::{dbw_to_watts, link_rate, snr_threshold, FadingSample, GainStream, LinkBudget};
use crate::error::{ConfigError, SimError};
use crate::relay::{harvest_amount, HarvestParams, RelayState, RelayStatus};
use crate::selection::{mrs_final_select, mrs_preselect, srs_select, Candidate, ForwardLink, Forwarder, PolicyKind};
use crate::trace::{SlotRecord, SlotTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Pipelined,
    Framed,
}

impl Schedule {
    pub fn name(&self) -> &'static str {
        match self {
            Schedule::Pipelined => "pipelined",
            Schedule::Framed => "framed",
        }
    }
}

impl std::str::FromStr for Schedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pipelined" => Ok(Schedule::Pipelined),
            "framed" => Ok(Schedule::Framed),
            other => Err(format!("unknown schedule {other:?} (expected pipelined or framed)")),
        }
    }
}

/// Every scenario parameter of one simulation.
///
/// Powers are given in dBW; all internal arithmetic is in watts and joules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_relays: usize,
    pub policy: PolicyKind,
    /// Target end-to-end rate, bits/s/Hz.
    pub target_rate: f64,
    pub eta: f64,
    pub source_power_dbw: f64,
    /// Fixed SRS relay transmit power.
    pub relay_power_dbw: f64,
    pub noise_var: f64,
    pub distance: f64,
    pub slot_duration: f64,
    /// Starting battery of every relay. `None` means ten fixed-power
    /// transmissions, `10·P_r·T`.
    pub initial_energy: Option<f64>,
    pub sense_threshold: f64,
    /// Source messages per trial.
    pub n_messages: usize,
    /// Leading messages per trial excluded from the outage count.
    pub warmup_messages: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub schedule: Schedule,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_relays: 5,
            policy: PolicyKind::Srs,
            target_rate: 1.0,
            eta: 0.5,
            source_power_dbw: 10.0,
            relay_power_dbw: 10.0,
            noise_var: 1.0,
            distance: 1.0,
            slot_duration: 1.0,
            initial_energy: None,
            sense_threshold: 0.0,
            n_messages: 20_000,
            warmup_messages: 0,
            n_trials: 1,
            seed: 1,
            schedule: Schedule::Pipelined,
        }
    }
}

fn check(ok: bool, key: &'static str, reason: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(key, reason()))
    }
}

impl SimConfig {
    pub fn source_power(&self) -> f64 {
        dbw_to_watts(self.source_power_dbw)
    }

    pub fn relay_power(&self) -> f64 {
        dbw_to_watts(self.relay_power_dbw)
    }

    /// Energy of one fixed-power SRS transmission, `P_r·T`.
    pub fn fixed_tx_energy(&self) -> f64 {
        self.relay_power() * self.slot_duration
    }

    pub fn initial_energy_joules(&self) -> f64 {
        self.initial_energy.unwrap_or_else(|| 10.0 * self.fixed_tx_energy())
    }

    pub fn harvest_params(&self) -> HarvestParams {
        HarvestParams {
            eta: self.eta,
            slot_duration: self.slot_duration,
            source_power: self.source_power(),
            distance: self.distance,
            sense_threshold: self.sense_threshold,
        }
    }

    pub fn forward_link(&self) -> ForwardLink {
        ForwardLink {
            target_rate: self.target_rate,
            noise_var: self.noise_var,
            distance: self.distance,
            slot_duration: self.slot_duration,
        }
    }

    /// Messages that count toward the outage estimate.
    pub fn counted_messages(&self) -> usize {
        (self.n_messages.saturating_sub(self.warmup_messages)) * self.n_trials
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite = |x: f64| x.is_finite();
        check(self.n_relays >= 1, "n", || "at least one relay is required".into())?;
        if let PolicyKind::Mrs { m } = self.policy {
            check(m >= 1 && m <= self.n_relays, "m", || {
                format!("m must lie in 1..={} (the number of relays), got {m}", self.n_relays)
            })?;
        }
        check(finite(self.target_rate) && self.target_rate >= 0.0, "rate", || {
            format!("rate must be finite and non-negative, got {}", self.target_rate)
        })?;
        check((0.0..=1.0).contains(&self.eta), "eta", || format!("eta must lie in [0, 1], got {}", self.eta))?;
        check(finite(self.source_power_dbw), "ps_dbw", || "source power must be finite".into())?;
        check(finite(self.relay_power_dbw), "pr_dbw", || "relay power must be finite".into())?;
        check(finite(self.noise_var) && self.noise_var > 0.0, "sigma2", || {
            format!("noise variance must be positive, got {}", self.noise_var)
        })?;
        check(finite(self.distance) && self.distance > 0.0, "distance", || {
            format!("distance must be positive, got {}", self.distance)
        })?;
        check(finite(self.slot_duration) && self.slot_duration > 0.0, "slot_duration", || {
            format!("slot duration must be positive, got {}", self.slot_duration)
        })?;
        if let Some(e) = self.initial_energy {
            check(finite(e) && e >= 0.0, "initial_energy", || {
                format!("initial energy must be finite and non-negative, got {e}")
            })?;
        }
        check(finite(self.sense_threshold) && self.sense_threshold >= 0.0, "sense_threshold", || {
            format!("sense threshold must be non-negative, got {}", self.sense_threshold)
        })?;
        check(self.n_messages >= 1, "messages", || "at least one message is required".into())?;
        check(self.warmup_messages < self.n_messages, "warmup", || {
            format!("warmup ({}) must be smaller than messages ({})", self.warmup_messages, self.n_messages)
        })?;
        check(self.n_trials >= 1, "trials", || "at least one trial is required".into())?;
        Ok(())
    }
}

/// Fate of one source message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    /// SRS found no available relay that could afford a transmission.
    NoCandidate,
    /// The SRS listener could not decode the source.
    DecodeFail,
    /// The SRS relay transmitted at fixed power but the relay→destination
    /// rate fell short.
    LinkFail,
    /// No MRS listener decoded the source.
    EmptyLambda,
    /// Every MRS decoder lacked the energy for channel inversion.
    NoFeasiblePower,
}

impl Outcome {
    pub fn is_outage(self) -> bool {
        self != Outcome::Success
    }

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::NoCandidate => "no_candidate",
            Outcome::DecodeFail => "decode_fail",
            Outcome::LinkFail => "link_fail",
            Outcome::EmptyLambda => "empty_lambda",
            Outcome::NoFeasiblePower => "no_feasible_power",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub message: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrialOptions {
    /// Check the energy ledger and transmitter exclusivity every slot.
    pub audit: bool,
    /// Record a [`SlotTrace`].
    pub trace: bool,
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    /// Post-warmup outcomes in message order.
    pub outcomes: Vec<SlotOutcome>,
    pub final_batteries: Vec<f64>,
    pub trace: Option<SlotTrace>,
}

impl TrialRun {
    pub fn outages(&self) -> usize {
        self.outcomes.iter().filter(|o| o.outcome.is_outage()).count()
    }
}

/// Supplies the per-slot gain vectors.
pub(crate) trait GainSource {
    fn next_slot(
        &mut self,
        slot: usize,
        to_relays: &mut [FadingSample],
        to_dest: &mut [FadingSample],
    ) -> Result<(), SimError>;
}

impl GainSource for GainStream {
    fn next_slot(&mut self, _: usize, to_relays: &mut [FadingSample], to_dest: &mut [FadingSample]) -> Result<(), SimError> {
        self.fill(to_relays);
        self.fill(to_dest);
        Ok(())
    }
}

enum Pending {
    Srs { message: usize, relay: usize },
    Mrs { message: usize, decoded: Vec<usize> },
}

/// Runs trial 0 of `config`.
pub fn run_trial(config: &SimConfig) -> Result<Vec<SlotOutcome>, SimError> {
    Ok(run_trial_with(config, 0, TrialOptions::default())?.outcomes)
}

/// Runs one trial on its own gain stream `(config.seed, trial)`.
pub fn run_trial_with(config: &SimConfig, trial: u64, options: TrialOptions) -> Result<TrialRun, SimError> {
    config.validate()?;
    let mut gains = GainStream::new(config.seed, trial);
    simulate(config, &mut gains, options)
}

pub(crate) fn simulate<G: GainSource>(
    config: &SimConfig,
    gains: &mut G,
    options: TrialOptions,
) -> Result<TrialRun, SimError> {
    let n = config.n_relays;
    let harvest = config.harvest_params();
    harvest.validate().map_err(|e| ConfigError::new("eta", e.to_string()))?;
    let source_budget = LinkBudget::new(config.source_power(), config.noise_var, config.distance)
        .map_err(|e| ConfigError::new("ps_dbw", e.to_string()))?;
    let relay_budget = LinkBudget::new(config.relay_power(), config.noise_var, config.distance)
        .map_err(|e| ConfigError::new("pr_dbw", e.to_string()))?;
    let fixed_cost = config.fixed_tx_energy();
    let forward_link = config.forward_link();
    let rate = config.target_rate;

    let mut relays: Vec<RelayState> = (0..n).map(|id| RelayState::new(id, config.initial_energy_joules())).collect();
    let mut results: Vec<Option<Outcome>> = vec![None; config.n_messages];
    let mut pending: Option<Pending> = None;
    let mut trace = options.trace.then(|| SlotTrace::new(config.clone()));

    let mut to_relays = vec![FadingSample::from_uniform(1.0); n];
    let mut to_dest = to_relays.clone();
    let mut before = vec![0.0; n];
    let mut view: Vec<Candidate> = Vec::with_capacity(n);

    let total_slots = match config.schedule {
        Schedule::Pipelined => config.n_messages + 1,
        Schedule::Framed => 2 * config.n_messages,
    };

    for slot in 0..total_slots {
        gains.next_slot(slot, &mut to_relays, &mut to_dest)?;
        for (b, r) in before.iter_mut().zip(&relays) {
            *b = r.battery();
        }
        let mut harvested = 0.0;
        let mut debited = 0.0;
        let mut forwarder: Option<Forwarder> = None;
        let mut resolved: Vec<SlotOutcome> = Vec::new();

        // forward
        if let Some(p) = pending.take() {
            let (message, outcome) = match p {
                Pending::Srs { message, relay } => {
                    let r = &mut relays[relay];
                    r.status = RelayStatus::Transmitting;
                    r.debit_for_tx(fixed_cost).map_err(|e| SimError::invariant(slot, e.to_string()))?;
                    debited += fixed_cost;
                    forwarder = Some(Forwarder { id: relay, tx_power: relay_budget.tx_power(), cost: fixed_cost });
                    let outcome = if link_rate(to_dest[relay], &relay_budget) >= rate {
                        Outcome::Success
                    } else {
                        Outcome::LinkFail
                    };
                    (message, outcome)
                }
                Pending::Mrs { message, decoded } => {
                    let outcome = if decoded.is_empty() {
                        Outcome::EmptyLambda
                    } else {
                        fill_view(&mut view, &relays);
                        match mrs_final_select(&decoded, &view, &to_dest, &forward_link) {
                            Some(f) => {
                                let r = &mut relays[f.id];
                                r.status = RelayStatus::Transmitting;
                                r.debit_for_tx(f.cost).map_err(|e| SimError::invariant(slot, e.to_string()))?;
                                debited += f.cost;
                                if options.audit {
                                    let budget = relay_budget.with_tx_power(f.tx_power).map_err(|e| {
                                        SimError::invariant(slot, format!("inversion power: {e}"))
                                    })?;
                                    let achieved = link_rate(to_dest[f.id], &budget);
                                    if achieved < rate * (1.0 - 1e-9) {
                                        return Err(SimError::invariant(
                                            slot,
                                            format!("inversion power delivers {achieved} < target {rate}"),
                                        ));
                                    }
                                }
                                forwarder = Some(f);
                                Outcome::Success
                            }
                            None => Outcome::NoFeasiblePower,
                        }
                    };
                    (message, outcome)
                }
            };
            results[message] = Some(outcome);
            resolved.push(SlotOutcome { message, outcome });
        }

        let broadcast = match config.schedule {
            Schedule::Pipelined => (slot < config.n_messages).then_some(slot),
            Schedule::Framed => (slot % 2 == 0).then_some(slot / 2),
        };

        let mut listeners: Vec<usize> = Vec::new();
        let mut decoders: Vec<usize> = Vec::new();
        if let Some(message) = broadcast {
            // designate
            fill_view(&mut view, &relays);
            match config.policy {
                PolicyKind::Srs => match srs_select(&view, fixed_cost) {
                    Some(id) => listeners.push(id),
                    None => {
                        results[message] = Some(Outcome::NoCandidate);
                        resolved.push(SlotOutcome { message, outcome: Outcome::NoCandidate });
                    }
                },
                PolicyKind::Mrs { m } => listeners = mrs_preselect(&view, m),
            }
            for &id in &listeners {
                relays[id].status = RelayStatus::Listening;
            }

            // broadcast
            for r in relays.iter_mut() {
                match r.status {
                    RelayStatus::Listening => {
                        if link_rate(to_relays[r.id], &source_budget) >= rate {
                            decoders.push(r.id);
                        }
                    }
                    RelayStatus::Idle => {
                        let e = harvest_amount(to_relays[r.id], &harvest);
                        r.credit(e).map_err(|e| SimError::invariant(slot, e.to_string()))?;
                        harvested += e;
                    }
                    RelayStatus::Transmitting => {}
                }
            }
            match config.policy {
                PolicyKind::Srs => {
                    if let Some(&relay) = listeners.first() {
                        if decoders.is_empty() {
                            results[message] = Some(Outcome::DecodeFail);
                            resolved.push(SlotOutcome { message, outcome: Outcome::DecodeFail });
                        } else {
                            pending = Some(Pending::Srs { message, relay });
                        }
                    }
                }
                PolicyKind::Mrs { .. } => {
                    pending = Some(Pending::Mrs { message, decoded: decoders.clone() });
                }
            }
        }

        if options.audit {
            audit_slot(slot, &relays, &before, harvested, debited, &listeners)?;
        }

        if let Some(t) = trace.as_mut() {
            t.records.push(SlotRecord {
                slot,
                source_gains: to_relays.clone(),
                dest_gains: to_dest.clone(),
                statuses: relays.iter().map(|r| r.status).collect(),
                listeners: listeners.clone(),
                decoded: decoders.clone(),
                forwarder,
                harvested,
                debited,
                batteries: relays.iter().map(|r| r.battery()).collect(),
                outcomes: resolved,
            });
        }

        // advance
        for r in relays.iter_mut() {
            r.status = RelayStatus::Idle;
        }
    }

    if pending.is_some() {
        return Err(SimError::invariant(total_slots, "a message was still awaiting its forward slot"));
    }

    let mut outcomes = Vec::with_capacity(config.n_messages - config.warmup_messages);
    for (message, r) in results.into_iter().enumerate() {
        let outcome = r.ok_or_else(|| SimError::invariant(total_slots, format!("message {message} never resolved")))?;
        if message >= config.warmup_messages {
            outcomes.push(SlotOutcome { message, outcome });
        }
    }
    Ok(TrialRun {
        outcomes,
        final_batteries: relays.iter().map(|r| r.battery()).collect(),
        trace,
    })
}

fn fill_view(view: &mut Vec<Candidate>, relays: &[RelayState]) {
    view.clear();
    view.extend(relays.iter().map(|r| Candidate {
        id: r.id,
        battery: r.battery(),
        available: r.status != RelayStatus::Transmitting,
    }));
}

/// Tolerance for the per-slot energy balance. Each changed battery can carry
/// half an ulp of rounding, so very large batteries widen it.
pub fn ledger_tolerance(batteries: &[f64]) -> f64 {
    let max = batteries.iter().copied().fold(0.0, f64::max);
    1e-9f64.max(batteries.len() as f64 * f64::EPSILON * max)
}

fn audit_slot(
    slot: usize,
    relays: &[RelayState],
    before: &[f64],
    harvested: f64,
    debited: f64,
    listeners: &[usize],
) -> Result<(), SimError> {
    let transmitting: Vec<usize> =
        relays.iter().filter(|r| r.status == RelayStatus::Transmitting).map(|r| r.id).collect();
    if transmitting.len() > 1 {
        return Err(SimError::invariant(slot, format!("several transmitters {transmitting:?}")));
    }
    if let Some(t) = transmitting.first() {
        if listeners.contains(t) {
            return Err(SimError::invariant(slot, format!("transmitter {t} also designated")));
        }
        if relays[*t].battery() > before[*t] {
            return Err(SimError::invariant(slot, format!("transmitter {t} was credited")));
        }
    }
    for r in relays {
        if r.status == RelayStatus::Listening && r.battery() != before[r.id] {
            return Err(SimError::invariant(slot, format!("listener {} battery changed", r.id)));
        }
        if r.battery().is_nan() || r.battery() < 0.0 {
            return Err(SimError::invariant(slot, format!("relay {} battery {} negative", r.id, r.battery())));
        }
    }
    let delta: f64 = relays.iter().zip(before).map(|(r, b)| r.battery() - b).sum();
    let expected = harvested - debited;
    let tol = ledger_tolerance(&relays.iter().map(|r| r.battery()).collect::<Vec<_>>());
    if (delta - expected).abs() > tol {
        return Err(SimError::invariant(
            slot,
            format!("energy ledger off: batteries moved {delta}, harvest minus spend {expected}"),
        ));
    }
    Ok(())
}

/// Probability that one relay fails to decode the source at `config`'s rate.
///
/// Exact for a single Rayleigh link, used by closed-form checks.
pub fn decode_failure_probability(config: &SimConfig) -> f64 {
    let theta = snr_threshold(config.target_rate) * config.noise_var * config.distance * config.distance
        / config.source_power();
    -(-theta).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SimConfig {
        SimConfig { n_messages: 500, ..SimConfig::default() }
    }

    #[test]
    fn defaults_validate() {
        base().validate().unwrap();
        assert_eq!(base().initial_energy_joules(), 100.0);
    }

    #[test]
    fn validation_names_key() {
        let e = SimConfig { eta: 1.5, ..base() }.validate().unwrap_err();
        assert_eq!(e.key, "eta");
        let e = SimConfig { policy: PolicyKind::Mrs { m: 6 }, ..base() }.validate().unwrap_err();
        assert_eq!(e.key, "m");
        let e = SimConfig { warmup_messages: 500, ..base() }.validate().unwrap_err();
        assert_eq!(e.key, "warmup");
        let e = SimConfig { target_rate: -1.0, ..base() }.validate().unwrap_err();
        assert_eq!(e.key, "rate");
    }

    #[test]
    fn no_energy_means_no_candidate() {
        let cfg = SimConfig { eta: 0.0, initial_energy: Some(0.0), ..base() };
        let out = run_trial(&cfg).unwrap();
        assert_eq!(out.len(), 500);
        assert!(out.iter().all(|o| o.outcome == Outcome::NoCandidate));
    }

    #[test]
    fn warmup_discards_leading_messages() {
        let cfg = SimConfig { warmup_messages: 100, ..base() };
        let out = run_trial(&cfg).unwrap();
        assert_eq!(out.len(), 400);
        assert_eq!(out[0].message, 100);
        let all = run_trial(&SimConfig { warmup_messages: 0, ..cfg }).unwrap();
        assert_eq!(&all[100..], &out[..]);
    }

    #[test]
    fn outcome_kinds_match_policy() {
        for schedule in [Schedule::Pipelined, Schedule::Framed] {
            let srs = run_trial(&SimConfig { eta: 0.05, target_rate: 1.5, schedule, ..base() }).unwrap();
            assert!(srs.iter().all(|o| !matches!(o.outcome, Outcome::EmptyLambda | Outcome::NoFeasiblePower)));
            let mrs = run_trial(&SimConfig {
                eta: 0.05,
                target_rate: 1.5,
                schedule,
                policy: PolicyKind::Mrs { m: 3 },
                ..base()
            })
            .unwrap();
            assert!(mrs.iter().all(|o| !matches!(o.outcome, Outcome::DecodeFail | Outcome::LinkFail)));
            assert!(mrs.iter().any(|o| o.outcome == Outcome::EmptyLambda));
        }
    }

    #[test]
    fn zero_rate_mrs_never_fails() {
        let cfg = SimConfig { target_rate: 0.0, policy: PolicyKind::Mrs { m: 2 }, n_relays: 4, ..base() };
        assert!(run_trial(&cfg).unwrap().iter().all(|o| o.outcome == Outcome::Success));
    }

    #[test]
    fn single_relay_pipelined_alternates_availability() {
        // The lone relay forwards in every other slot, so it can never listen
        // to the message broadcast while it transmits.
        let cfg = SimConfig { n_relays: 1, target_rate: 0.0, initial_energy: Some(1e12), ..base() };
        let out = run_trial(&cfg).unwrap();
        for pair in out.chunks(2) {
            assert_eq!(pair[0].outcome, Outcome::Success);
            if let Some(o) = pair.get(1) {
                assert_eq!(o.outcome, Outcome::NoCandidate);
            }
        }
    }

    #[test]
    fn audit_passes_on_mixed_configs() {
        for policy in [PolicyKind::Srs, PolicyKind::Mrs { m: 2 }] {
            for schedule in [Schedule::Pipelined, Schedule::Framed] {
                let cfg = SimConfig { policy, schedule, eta: 0.1, ..base() };
                run_trial_with(&cfg, 3, TrialOptions { audit: true, trace: false }).unwrap();
            }
        }
    }

    #[test]
    fn decode_failure_closed_form() {
        let p = decode_failure_probability(&SimConfig::default());
        assert!((p - (1.0 - (-0.3f64).exp())).abs() < 1e-12);
    }
}
