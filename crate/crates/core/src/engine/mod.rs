//! Synchronous-round simulation of the protocols.

pub mod config;
pub mod election;
pub mod result;
pub mod run;
pub mod sweep;
pub mod trace;
pub mod verify;
pub mod world;

pub use config::{DPrime, GraphSource, Mode, RunConfig, SimConfig};
pub use election::{run_leader_election, run_leader_election_traced, ElectionOutcome};
pub use result::{Outcome, TrialResult};
pub use run::{run_average_degree, run_network_size, run_trial, TrialRun};
pub use sweep::{draw_trial_graph, run_election_sweep, run_sweep, ElectionRecord, TrialGraph, TrialRecord};
pub use trace::{Event, RoundTrace, TraceEvent};
pub use verify::{ground_truth_verify, replay, Replay, ReplayError, Violation, ViolationKind, VerifyReport};
pub use world::{Envelope, RoundSummary, World};
