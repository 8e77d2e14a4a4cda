//! Slot-level Monte Carlo simulator for a decode-and-forward relay network
//! whose relays are powered only by energy harvested from the source's RF
//! broadcast.
//!
//! Two relay-selection schemes are provided:
//!
//! * **SRS** (single relay selection): no relay→destination CSI. The relay
//!   with the most stored energy listens and forwards at a fixed power.
//! * **MRS** (multiple relay selection): the `M` richest relays listen; among
//!   those that decoded, the forwarder is picked once the relay→destination
//!   gains are known and transmits with channel-inversion power.
//!
//! The [`harness`] module estimates outage probabilities, sweeps parameter
//! grids and searches the pre-selection size `M` that minimises outage.

pub mod channel;
pub mod engine;
pub mod error;
pub mod harness;
pub mod relay;
pub mod report;
pub mod selection;
pub mod trace;

pub use channel::{dbw_to_watts, inversion_power, link_rate, FadingSample, GainStream, LinkBudget};
pub use engine::{run_trial, run_trial_with, Outcome, Schedule, SimConfig, SlotOutcome, TrialOptions, TrialRun};
pub use error::{ConfigError, SimError};
pub use harness::{
    compare_policies, estimate_outage, optimize_m, sweep, Harness, MSearch, OutageEstimate,
    PolicyComparison, SweepPoint, SweepSpec,
};
pub use relay::{harvest_amount, HarvestParams, RelayState, RelayStatus};
pub use selection::{mrs_final_select, mrs_preselect, srs_select, Candidate, Forwarder, ForwardLink, PolicyKind};
pub use trace::{replay_check, ReplayVerdict, SlotRecord, SlotTrace};
