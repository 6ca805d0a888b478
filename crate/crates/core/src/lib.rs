//! Deterministic discrete-event simulator for a self-synchronising time-based
//! proof-of-stake protocol.
//!
//! The crate is organised bottom-up: [`clock`] and [`network`] model the
//! shared functionalities, [`crypto`] provides seeded VRF/KES stand-ins,
//! [`chain`] holds blocks, validation and chain selection, [`party`] runs the
//! per-participant protocol, [`adversary`] drives corrupted parties and the
//! network knobs, [`metrics`] analyses runs, and [`harness`] ties everything
//! into a replayable scenario runner.

pub mod adversary;
pub mod chain;
pub mod clock;
pub mod crypto;
pub mod harness;
pub mod metrics;
pub mod network;
pub mod party;
pub mod types;

pub use harness::{run, Outcome, RunOutput, RunReport, Scenario};
pub use types::{Digest, PartyId, Slot, Tick};
