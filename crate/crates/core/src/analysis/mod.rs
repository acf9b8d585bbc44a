//! Probability bounds for convergence and election, exact walk
//! probabilities to test them against, and trial statistics.

pub mod bounds;
pub mod stats;
pub mod walks;

pub use bounds::{
    bound_report, epsilon, lemma1_bound, lemma2_bound, leader_binomial_tail, leader_success_lower_bound,
    ratio_to_f64, theorem2_k0, Bound, BoundError, BoundInputs, K0,
};
pub use stats::{
    aggregate_elections, aggregate_trials, quantile, summarize_steps, ElectionStats, HistBin, StatsError,
    TrialStats, DEFAULT_BIN_WIDTH,
};
pub use walks::{hit_probability, meet_probability, min_hit_probability, min_meet_probability};
