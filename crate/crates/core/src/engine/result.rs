use serde::{Deserialize, Serialize};

use super::config::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// Every node stopped through the vote check.
    Halted,
    /// Mode without distributed stopping reached its target.
    Converged,
    /// Mass froze before the nodes could agree.
    Deadlock,
    MaxSteps,
}

/// Per-trial record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    pub mode: Mode,
    /// Start of the final stretch during which every node satisfied the
    /// target condition (0 means from initialization).
    pub steps_converged: Option<u64>,
    /// Round by which every node had halted.
    pub steps_halted: Option<u64>,
    /// Final `(y^s, z^s)` per node.
    pub final_states: Vec<(i64, i64)>,
    pub correct: bool,
    pub leader_count: usize,
    pub deadlocked: bool,
    pub outcome: Outcome,
    /// Last round in which any mass was sent.
    pub last_send_round: u64,
}

impl TrialResult {
    /// Halting round, or the convergence round for modes that never halt.
    pub fn steps(&self) -> Option<u64> {
        match self.mode {
            Mode::SizeAnonymous => self.steps_converged,
            _ => self.steps_halted,
        }
    }
}
