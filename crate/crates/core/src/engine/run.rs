//! Trial orchestration for every mode.

use rand::RngCore;

use super::config::{Mode, RunConfig};
use super::election::run_leader_election_traced;
use super::result::{Outcome, TrialResult};
use super::trace::{Event, RoundTrace};
use super::world::World;
use crate::graph::Digraph;
use crate::protocol::{Fraction, NodeState};

/// A finished trial and, when requested, its trace.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub result: TrialResult,
    pub trace: Option<RoundTrace>,
}

/// Whether every node's current state satisfies the running target condition.
pub(crate) fn target_holds(mode: Mode, g: &Digraph, states: impl IntoIterator<Item = (i64, i64)>) -> bool {
    let n = g.node_count() as i64;
    let mut states = states.into_iter();
    match mode {
        Mode::AvgDegree => {
            let target = Fraction::new(g.total_out_degree() as i64, n);
            states.all(|(y, z)| z >= 1 && Fraction::new(y, z) == target)
        }
        _ => states.all(|(_, z)| z == n),
    }
}

/// Final correctness: avg-degree needs the exact average degree, size modes
/// need `z^s = n` everywhere, and the run must have stopped properly.
pub(crate) fn final_correct(mode: Mode, g: &Digraph, outcome: Outcome, states: &[(i64, i64)]) -> bool {
    let stopped = match mode {
        Mode::SizeAnonymous => outcome == Outcome::Converged,
        _ => outcome == Outcome::Halted,
    };
    let n = g.node_count() as i64;
    let values = match mode {
        Mode::AvgDegree => {
            let target = Fraction::new(g.total_out_degree() as i64, n);
            states.iter().all(|&(y, z)| z >= 1 && Fraction::new(y, z) == target)
        }
        _ => states.iter().all(|&(_, z)| z == n),
    };
    stopped && values
}

fn states_of(nodes: &[NodeState]) -> impl Iterator<Item = (i64, i64)> + '_ {
    nodes.iter().map(|n| (n.state_y(), n.state_z()))
}

struct Drive {
    converged: Option<u64>,
    halted: Option<u64>,
    outcome: Outcome,
}

fn drive<R: RngCore + ?Sized>(world: &mut World<'_>, cfg: &RunConfig, rng: &mut R) -> Drive {
    let g = world.graph();
    let mode = cfg.mode;
    let anonymous = !world.has_voting();
    let mut converged = target_holds(mode, g, states_of(world.nodes())).then(|| world.round());
    let mut frozen_since: Option<u64> = None;
    let outcome = loop {
        if world.all_halted() {
            break Outcome::Halted;
        }
        if anonymous && converged.is_some() {
            break Outcome::Converged;
        }
        if world.round() >= cfg.max_steps {
            break Outcome::MaxSteps;
        }
        world.step_round(rng);
        let k = world.round();
        if target_holds(mode, g, states_of(world.nodes())) {
            converged.get_or_insert(k);
        } else {
            converged = None;
        }
        if world.all_halted() || (anonymous && converged.is_some()) {
            continue;
        }
        if world.is_frozen() {
            let since = *frozen_since.get_or_insert(k);
            if anonymous || k >= since + 2 * world.d_prime() {
                let last_send_round = world.last_send_round();
                if let Some(t) = world.trace_mut() {
                    t.push(k, Event::Deadlock { last_send_round });
                }
                break Outcome::Deadlock;
            }
        } else {
            frozen_since = None;
        }
    };
    let halted = (outcome == Outcome::Halted).then(|| world.round());
    Drive { converged, halted, outcome }
}

fn header(cfg: &RunConfig) -> Event {
    Event::Header {
        mode: cfg.mode,
        n: cfg.n,
        d_prime: cfg.d_prime,
        u_v: cfg.u_v,
        trigger: cfg.trigger,
        assigned_leaders: cfg.assigned_leaders.clone(),
    }
}

/// Runs one trial of `cfg.mode`. `g` must be the graph `cfg` was resolved against.
pub fn run_trial<R: RngCore + ?Sized>(g: &Digraph, cfg: &RunConfig, rng: &mut R, capture: bool) -> TrialRun {
    let mut trace = capture.then(|| {
        let mut t = RoundTrace::new();
        t.push(0, header(cfg));
        t
    });
    let n = g.node_count();
    let mut offset = 0;
    let mut leader_count = 0;
    let mut world = match cfg.mode {
        Mode::AvgDegree => World::average_degree(g, cfg, rng, trace.take()),
        Mode::SizeSeq | Mode::SizeParOracle => {
            let flags = match &cfg.assigned_leaders {
                Some(list) => {
                    let mut flags = vec![false; n];
                    for &l in list {
                        flags[l] = true;
                    }
                    flags
                }
                None => {
                    let out = run_leader_election_traced(g, cfg, rng, trace.as_mut());
                    if cfg.mode == Mode::SizeSeq {
                        offset = cfg.election_rounds();
                    }
                    out.flags
                }
            };
            leader_count = flags.iter().filter(|&&f| f).count();
            World::network_size(g, cfg, &flags, offset, trace.take())
        }
        Mode::SizeParCorrection => World::parallel_correction(g, cfg, trace.take()),
        Mode::SizeAnonymous => World::anonymous(g, cfg, trace.take()),
    };

    let mut d = drive(&mut world, cfg, rng);
    if cfg.mode == Mode::SizeParCorrection {
        leader_count = world.leader_count();
    }
    if cfg.mode == Mode::SizeParOracle && cfg.elects() {
        let floor = cfg.election_rounds();
        d.converged = d.converged.map(|c| c.max(floor));
        d.halted = d.halted.map(|h| h.max(floor));
    }
    let final_states: Vec<(i64, i64)> = states_of(world.nodes()).collect();
    let last_send_round = world.last_send_round();
    let end_round = world.round();
    let mut trace = world.into_trace();
    if let Some(t) = trace.as_mut() {
        t.push(end_round, Event::End { outcome: d.outcome });
    }
    TrialRun {
        result: TrialResult {
            mode: cfg.mode,
            steps_converged: d.converged,
            steps_halted: d.halted,
            correct: final_correct(cfg.mode, g, d.outcome, &final_states),
            final_states,
            leader_count,
            deadlocked: d.outcome == Outcome::Deadlock,
            outcome: d.outcome,
            last_send_round,
        },
        trace,
    }
}

/// Algorithm-1 trial; `cfg.mode` must be avg-degree.
pub fn run_average_degree<R: RngCore + ?Sized>(g: &Digraph, cfg: &RunConfig, rng: &mut R) -> TrialResult {
    assert_eq!(cfg.mode, Mode::AvgDegree, "run_average_degree called with {}", cfg.mode);
    run_trial(g, cfg, rng, false).result
}

/// Network-size trial in any size mode.
pub fn run_network_size<R: RngCore + ?Sized>(g: &Digraph, cfg: &RunConfig, rng: &mut R) -> TrialResult {
    assert!(cfg.mode.is_size(), "run_network_size called with {}", cfg.mode);
    run_trial(g, cfg, rng, false).result
}
