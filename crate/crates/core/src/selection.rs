//! SRS and MRS relay-selection rules.
//!
//! All rules are pure functions of a battery snapshot. Ties are always broken
//! toward the lowest relay id, and a relay that cannot afford its transmission
//! is never selected.

use serde::{Deserialize, Serialize};

use crate::channel::{inversion_power, FadingSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PolicyKind {
    /// Single relay selection with fixed transmit power.
    Srs,
    /// Multiple relay selection with `m` pre-selected listeners.
    Mrs { m: usize },
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Srs => "srs",
            PolicyKind::Mrs { .. } => "mrs",
        }
    }

    pub fn m(&self) -> Option<usize> {
        match *self {
            PolicyKind::Srs => None,
            PolicyKind::Mrs { m } => Some(m),
        }
    }
}

/// One relay as seen by a selection rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: usize,
    pub battery: f64,
    /// False while the relay is busy forwarding the previous message.
    pub available: bool,
}

/// SRS: the available relay with the most energy left after paying
/// `fixed_cost`, or `None` when nobody can afford it.
pub fn srs_select(view: &[Candidate], fixed_cost: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for c in view.iter().filter(|c| c.available && c.battery >= fixed_cost) {
        let surplus = c.battery - fixed_cost;
        match best {
            Some((id, s)) if surplus < s || (surplus == s && id < c.id) => {}
            _ => best = Some((c.id, surplus)),
        }
    }
    best.map(|(id, _)| id)
}

/// MRS first step: ids of the (up to) `m` available relays with the largest
/// batteries, returned in ascending id order.
pub fn mrs_preselect(view: &[Candidate], m: usize) -> Vec<usize> {
    let mut ranked: Vec<&Candidate> = view.iter().filter(|c| c.available).collect();
    ranked.sort_by(|a, b| b.battery.total_cmp(&a.battery).then(a.id.cmp(&b.id)));
    let mut chosen: Vec<usize> = ranked.into_iter().take(m).map(|c| c.id).collect();
    chosen.sort_unstable();
    chosen
}

/// Relay→destination link parameters used to price a forwarding candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardLink {
    pub target_rate: f64,
    pub noise_var: f64,
    pub distance: f64,
    pub slot_duration: f64,
}

impl ForwardLink {
    /// Energy needed to reach the target rate over `gain`, or `None` when the
    /// channel is dead.
    pub fn cost(&self, gain: FadingSample) -> Option<(f64, f64)> {
        let power = inversion_power(self.target_rate, gain, self.noise_var, self.distance).ok()?;
        Some((power, power * self.slot_duration))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forwarder {
    pub id: usize,
    pub tx_power: f64,
    pub cost: f64,
}

/// MRS second step: among relays that decoded, pick the one with the largest
/// battery surplus after paying its channel-inversion cost.
///
/// `gains_to_dest` is indexed by relay id. Relays missing from `view` or
/// facing a zero gain are skipped.
pub fn mrs_final_select(
    decoded: &[usize],
    view: &[Candidate],
    gains_to_dest: &[FadingSample],
    link: &ForwardLink,
) -> Option<Forwarder> {
    let mut best: Option<(Forwarder, f64)> = None;
    for &id in decoded {
        let Some(c) = view.iter().find(|c| c.id == id) else { continue };
        let Some((tx_power, cost)) = link.cost(gains_to_dest[id]) else { continue };
        if c.battery < cost {
            continue;
        }
        let surplus = c.battery - cost;
        match best {
            Some((f, s)) if surplus < s || (surplus == s && f.id < id) => {}
            _ => best = Some((Forwarder { id, tx_power, cost }, surplus)),
        }
    }
    best.map(|(f, _)| f)
}
