//! Per-slot traces and the replay checker.
//!
//! A trace is line-delimited JSON: a header line holding the configuration,
//! then one [`SlotRecord`] per slot. Replaying feeds the recorded gains back
//! through the engine and requires every recomputed record to serialise to
//! exactly the recorded bytes.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::channel::FadingSample;
use crate::engine::{simulate, GainSource, SimConfig, SlotOutcome, TrialOptions};
use crate::error::SimError;
use crate::relay::RelayStatus;
use crate::selection::Forwarder;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub source_gains: Vec<FadingSample>,
    pub dest_gains: Vec<FadingSample>,
    pub statuses: Vec<RelayStatus>,
    pub listeners: Vec<usize>,
    pub decoded: Vec<usize>,
    pub forwarder: Option<Forwarder>,
    pub harvested: f64,
    pub debited: f64,
    /// Batteries at the end of the slot.
    pub batteries: Vec<f64>,
    /// Messages whose fate was settled in this slot.
    pub outcomes: Vec<SlotOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceHeader {
    config: SimConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotTrace {
    pub config: SimConfig,
    pub records: Vec<SlotRecord>,
}

impl SlotTrace {
    pub fn new(config: SimConfig) -> Self {
        Self { config, records: Vec::new() }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut out, &TraceHeader { config: self.config.clone() })?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, SimError> {
        let mut lines = input.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
        let (_, header) = lines.next().ok_or_else(|| SimError::Trace("empty trace".into()))?;
        let header = header.map_err(|e| SimError::Trace(e.to_string()))?;
        let header: TraceHeader =
            serde_json::from_str(&header).map_err(|e| SimError::Trace(format!("line 1: {e}")))?;
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| SimError::Trace(e.to_string()))?;
            let rec: SlotRecord =
                serde_json::from_str(&line).map_err(|e| SimError::Trace(format!("line {}: {e}", i + 1)))?;
            records.push(rec);
        }
        Ok(Self { config: header.config, records })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayVerdict {
    Match,
    /// First slot whose recomputed record differs from the recorded one.
    Diverged { slot: usize },
}

impl ReplayVerdict {
    pub fn is_match(self) -> bool {
        self == ReplayVerdict::Match
    }
}

struct RecordedGains<'a> {
    records: &'a [SlotRecord],
    n_relays: usize,
}

impl GainSource for RecordedGains<'_> {
    fn next_slot(
        &mut self,
        slot: usize,
        to_relays: &mut [FadingSample],
        to_dest: &mut [FadingSample],
    ) -> Result<(), SimError> {
        let rec = self.records.get(slot).ok_or_else(|| SimError::Trace(format!("trace ends before slot {slot}")))?;
        let valid = |g: &[FadingSample]| {
            g.len() == self.n_relays && g.iter().all(|x| FadingSample::new(x.gain_sq()).is_some())
        };
        if !valid(&rec.source_gains) || !valid(&rec.dest_gains) {
            return Err(SimError::Trace(format!("slot {slot}: malformed gain vector")));
        }
        to_relays.copy_from_slice(&rec.source_gains);
        to_dest.copy_from_slice(&rec.dest_gains);
        Ok(())
    }
}

/// Recomputes every slot of `trace` from its recorded gains and compares the
/// result record by record.
pub fn replay_check(trace: &SlotTrace) -> ReplayVerdict {
    if trace.config.validate().is_err() {
        return ReplayVerdict::Diverged { slot: 0 };
    }
    let mut source = RecordedGains { records: &trace.records, n_relays: trace.config.n_relays };
    let replayed = simulate(&trace.config, &mut source, TrialOptions { audit: false, trace: true });
    let replayed = match replayed {
        Ok(run) => run.trace.expect("tracing was requested"),
        Err(_) => {
            // A bad slot makes the engine bail out; find how far it agreed.
            let upto = first_bad_gain_slot(trace).unwrap_or(trace.records.len());
            return ReplayVerdict::Diverged { slot: upto };
        }
    };
    for (i, (a, b)) in trace.records.iter().zip(&replayed.records).enumerate() {
        if serde_json::to_string(a).ok() != serde_json::to_string(b).ok() {
            return ReplayVerdict::Diverged { slot: i };
        }
    }
    if trace.records.len() != replayed.records.len() {
        return ReplayVerdict::Diverged { slot: trace.records.len().min(replayed.records.len()) };
    }
    ReplayVerdict::Match
}

fn first_bad_gain_slot(trace: &SlotTrace) -> Option<usize> {
    let n = trace.config.n_relays;
    trace.records.iter().position(|r| {
        r.source_gains.len() != n
            || r.dest_gains.len() != n
            || r.source_gains.iter().chain(&r.dest_gains).any(|g| FadingSample::new(g.gain_sq()).is_none())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_trial_with;
    use crate::selection::PolicyKind;

    fn traced(cfg: &SimConfig) -> SlotTrace {
        run_trial_with(cfg, 0, TrialOptions { audit: true, trace: true }).unwrap().trace.unwrap()
    }

    fn cfg() -> SimConfig {
        SimConfig { n_messages: 200, eta: 0.1, policy: PolicyKind::Mrs { m: 2 }, ..SimConfig::default() }
    }

    #[test]
    fn seeded_trace_replays() {
        assert_eq!(replay_check(&traced(&cfg())), ReplayVerdict::Match);
        assert_eq!(replay_check(&traced(&SimConfig { policy: PolicyKind::Srs, ..cfg() })), ReplayVerdict::Match);
    }

    #[test]
    fn perturbed_battery_is_caught_at_its_slot() {
        let mut t = traced(&cfg());
        t.records[37].batteries[1] += 1e-6;
        assert_eq!(replay_check(&t), ReplayVerdict::Diverged { slot: 37 });
    }

    #[test]
    fn truncated_trace_diverges() {
        let mut t = traced(&cfg());
        t.records.truncate(50);
        assert!(!replay_check(&t).is_match());
    }

    #[test]
    fn jsonl_roundtrip_is_byte_stable() {
        let t = traced(&cfg());
        let text = t.to_jsonl();
        let back = SlotTrace::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_jsonl(), text);
        assert_eq!(text.lines().count(), t.records.len() + 1);
        assert_eq!(traced(&cfg()).to_jsonl(), text);
    }
}
