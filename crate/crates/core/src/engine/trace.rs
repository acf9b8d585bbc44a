//! Round-by-round event log, serialized as one JSON object per line.

use serde::{Deserialize, Serialize};

use super::config::Mode;
use super::result::Outcome;
use crate::protocol::{Fraction, Trigger};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// First line of every trace.
    Header {
        mode: Mode,
        n: usize,
        d_prime: u64,
        u_v: u32,
        trigger: Trigger,
        assigned_leaders: Option<Vec<usize>>,
    },
    /// Election draw at the start of an election round (`eta = -1` for followers).
    Draw { node: usize, eta: i64 },
    /// End of an election round.
    Elect { node: usize, eta: i64, leader_max: i64, flag: bool },
    /// Start of the mass iteration; subsequent rounds are numbered from here.
    IterationStart,
    /// Initial mass and state of a node.
    Init { node: usize, y: i64, z: i64 },
    /// `(-1, 0)` added to a node's held mass.
    Correction { node: usize },
    /// Mass delivered to a halted node and discarded.
    Drop { src: usize, dst: usize, y: i64, z: i64 },
    State { node: usize, y: i64, z: i64 },
    Send { src: usize, dst: usize, y: i64, z: i64 },
    /// Votes held at a check round, before the stop check.
    Vote { node: usize, min: Fraction, max: Fraction },
    Halt { node: usize },
    /// Mass is frozen: nothing in flight and no node will send again.
    Deadlock { last_send_round: u64 },
    End { outcome: Outcome },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub round: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundTrace {
    events: Vec<TraceEvent>,
}

impl RoundTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, round: u64, event: Event) {
        self.events.push(TraceEvent { round, event });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn events_mut(&mut self) -> &mut Vec<TraceEvent> {
        &mut self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(RoundTrace { events })
    }
}
