//! Quantized, finite-time computation of a digraph's average degree and size.
//!
//! Nodes hold integer mass pairs that random-walk over the graph and merge
//! when they meet; the ratio of the pair a node last saw is its answer.
//! Min/max voting over `D'` rounds lets every node detect agreement and stop.
//! Network size additionally relies on a quantized leader election.
//!
//! * [`graph`]: digraph type, connectivity, diameter, random generation, edge-list IO.
//! * [`protocol`]: exact fractions and the per-node state machine.
//! * [`engine`]: synchronous-round simulator, run modes, traces and verification.
//! * [`analysis`]: closed-form probability bounds and trial statistics.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod graph;
pub mod protocol;
pub mod rng;

pub use error::{ConfigError, GraphError, ProtocolError};
pub use graph::Digraph;
pub use protocol::{Fraction, Mass, NodeState, TargetDistribution, Trigger, VoteSource};
