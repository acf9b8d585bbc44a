//! Quantized leader election: `U_v` rounds of `D'`-step max-consensus over
//! random draws; nodes that miss the maximum become followers.

use rand::RngCore;
use serde::Serialize;

use super::config::RunConfig;
use super::trace::{Event, RoundTrace};
use crate::graph::Digraph;
use crate::protocol::NodeState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ElectionOutcome {
    pub flags: Vec<bool>,
    pub leader_count: usize,
    /// Leader count after each election round.
    pub leaders_per_round: Vec<usize>,
}

/// One synchronous election step at election round `k` (1-based).
///
/// Returns the nodes demoted at this step (only at `k mod D' == 0`).
pub(crate) fn election_step<R: RngCore + ?Sized>(
    g: &Digraph,
    nodes: &mut [NodeState],
    k: u64,
    d_prime: u64,
    eta_max: &[u64],
    rng: &mut R,
    mut trace: Option<&mut RoundTrace>,
) -> Vec<usize> {
    if (k - 1) % d_prime == 0 {
        for (j, node) in nodes.iter_mut().enumerate() {
            node.leader_round_reset(eta_max[j], rng)
                .expect("eta_max validated by config");
            if let Some(t) = trace.as_deref_mut() {
                if node.leader_flag() {
                    t.push(k, Event::Draw { node: j, eta: node.eta() });
                }
            }
        }
    }
    let snapshot: Vec<i64> = nodes.iter().map(NodeState::leader_max).collect();
    for (j, node) in nodes.iter_mut().enumerate() {
        node.leader_max_step(g.in_neighbors(j).iter().map(|&i| snapshot[i]));
    }
    let mut demoted = Vec::new();
    if k % d_prime == 0 {
        for (j, node) in nodes.iter_mut().enumerate() {
            if node.leader_round_conclude() {
                demoted.push(j);
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(
                    k,
                    Event::Elect {
                        node: j,
                        eta: node.eta(),
                        leader_max: node.leader_max(),
                        flag: node.leader_flag(),
                    },
                );
            }
        }
    }
    demoted
}

pub fn run_leader_election<R: RngCore + ?Sized>(
    g: &Digraph,
    cfg: &RunConfig,
    rng: &mut R,
) -> ElectionOutcome {
    run_leader_election_traced(g, cfg, rng, None)
}

pub fn run_leader_election_traced<R: RngCore + ?Sized>(
    g: &Digraph,
    cfg: &RunConfig,
    rng: &mut R,
    mut trace: Option<&mut RoundTrace>,
) -> ElectionOutcome {
    let mut nodes = vec![NodeState::election_candidate(); g.node_count()];
    let mut leaders_per_round = Vec::with_capacity(cfg.u_v as usize);
    for k in 1..=cfg.election_rounds() {
        election_step(g, &mut nodes, k, cfg.d_prime, &cfg.eta_max, rng, trace.as_deref_mut());
        if k % cfg.d_prime == 0 {
            leaders_per_round.push(nodes.iter().filter(|n| n.leader_flag()).count());
        }
    }
    let flags: Vec<bool> = nodes.iter().map(NodeState::leader_flag).collect();
    ElectionOutcome {
        leader_count: flags.iter().filter(|&&f| f).count(),
        flags,
        leaders_per_round,
    }
}
