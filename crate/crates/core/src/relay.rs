//! Relay battery ledger: harvest credits and transmission debits.
//!
//! Batteries are unbounded and never leak. A debit is only committed when the
//! stored energy covers it, so a battery can never go negative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::FadingSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayStatus {
    Idle,
    Listening,
    Transmitting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayState {
    pub id: usize,
    battery: f64,
    pub status: RelayStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LedgerError {
    #[error("relay {0} is transmitting and cannot harvest")]
    CreditWhileTransmitting(usize),
    #[error("relay {id}: energy amount must be finite and non-negative, got {amount}")]
    BadAmount { id: usize, amount: f64 },
}

/// The relay cannot afford the requested transmission.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("relay {id} holds {battery} J but the transmission costs {cost} J")]
pub struct Infeasible {
    pub id: usize,
    pub battery: f64,
    pub cost: f64,
}

impl RelayState {
    pub fn new(id: usize, battery: f64) -> Self {
        assert!(battery.is_finite() && battery >= 0.0, "initial battery {battery} must be non-negative");
        Self { id, battery, status: RelayStatus::Idle }
    }

    #[inline]
    pub fn battery(&self) -> f64 {
        self.battery
    }

    /// Stores harvested energy.
    pub fn credit(&mut self, amount: f64) -> Result<(), LedgerError> {
        if self.status == RelayStatus::Transmitting {
            return Err(LedgerError::CreditWhileTransmitting(self.id));
        }
        if !(amount.is_finite() && amount >= 0.0) {
            return Err(LedgerError::BadAmount { id: self.id, amount });
        }
        self.battery += amount;
        Ok(())
    }

    /// Spends `cost` joules on a transmission if the battery covers it;
    /// otherwise leaves the battery untouched.
    pub fn debit_for_tx(&mut self, cost: f64) -> Result<(), Infeasible> {
        debug_assert!(cost >= 0.0);
        if self.battery >= cost {
            self.battery -= cost;
            Ok(())
        } else {
            Err(Infeasible { id: self.id, battery: self.battery, cost })
        }
    }
}

/// Parameters of the per-slot RF harvest `η·P_s·|h|²·T / d²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvestParams {
    pub eta: f64,
    pub slot_duration: f64,
    pub source_power: f64,
    pub distance: f64,
    /// Received energy below this level cannot be sensed and is lost.
    pub sense_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum HarvestParamsError {
    #[error("eta must lie in [0, 1], got {0}")]
    Eta(f64),
    #[error("slot duration must be positive, got {0}")]
    SlotDuration(f64),
    #[error("source power must be non-negative, got {0}")]
    SourcePower(f64),
    #[error("distance must be positive, got {0}")]
    Distance(f64),
    #[error("sense threshold must be non-negative, got {0}")]
    SenseThreshold(f64),
}

impl HarvestParams {
    pub fn validate(&self) -> Result<(), HarvestParamsError> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(HarvestParamsError::Eta(self.eta));
        }
        if !(self.slot_duration.is_finite() && self.slot_duration > 0.0) {
            return Err(HarvestParamsError::SlotDuration(self.slot_duration));
        }
        if !(self.source_power.is_finite() && self.source_power >= 0.0) {
            return Err(HarvestParamsError::SourcePower(self.source_power));
        }
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return Err(HarvestParamsError::Distance(self.distance));
        }
        if !(self.sense_threshold.is_finite() && self.sense_threshold >= 0.0) {
            return Err(HarvestParamsError::SenseThreshold(self.sense_threshold));
        }
        Ok(())
    }
}

/// Energy one idle relay stores from a single source broadcast.
pub fn harvest_amount(gain: FadingSample, params: &HarvestParams) -> f64 {
    let received =
        params.eta * params.source_power * gain.gain_sq() * params.slot_duration / (params.distance * params.distance);
    if received >= params.sense_threshold {
        received
    } else {
        0.0
    }
}
