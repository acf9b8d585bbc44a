//! Barrier-phased synchronous rounds.
//!
//! Phase order inside round `k`:
//! 1. vote reset when `(k - 1) mod D' == 0`;
//! 2. one synchronous min/max vote exchange;
//! 3. election step (when an election runs on the same rounds);
//! 4. delivery of mass sent in round `k - 1`, then correction injection;
//! 5. state update and transmission, nodes in ascending id order;
//! 6. stop check when `k mod D' == 0`.

use rand::RngCore;

use super::config::RunConfig;
use super::election::election_step;
use super::trace::{Event, RoundTrace};
use crate::graph::Digraph;
use crate::protocol::{Mass, NodeState, TargetDistribution, TransmitRule, Vote, VoteSource};

/// A mass message in flight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Envelope {
    pub src: usize,
    pub dst: usize,
    pub mass: Mass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundSummary {
    pub round: u64,
    pub sent: usize,
    pub halted: usize,
}

#[derive(Debug, Clone)]
struct ConcurrentElection {
    rounds: u64,
    eta_max: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct World<'g> {
    graph: &'g Digraph,
    dists: Vec<TargetDistribution>,
    nodes: Vec<NodeState>,
    in_flight: Vec<Envelope>,
    round: u64,
    d_prime: u64,
    rule: TransmitRule,
    vote: Option<VoteSource>,
    stop_after: u64,
    election: Option<ConcurrentElection>,
    trace: Option<RoundTrace>,
    last_send_round: u64,
}

fn distributions(g: &Digraph) -> Vec<TargetDistribution> {
    (0..g.node_count())
        .map(|j| {
            TargetDistribution::new(j, g.out_neighbors(j))
                .expect("strongly connected digraph has out-neighbors")
        })
        .collect()
}

impl<'g> World<'g> {
    fn base(g: &'g Digraph, cfg: &RunConfig, nodes: Vec<NodeState>, start_round: u64, trace: Option<RoundTrace>) -> Self {
        let mut world = World {
            graph: g,
            dists: distributions(g),
            nodes,
            in_flight: Vec::new(),
            round: start_round,
            d_prime: cfg.d_prime,
            rule: TransmitRule {
                trigger: cfg.trigger,
                correction_tokens: false,
            },
            vote: Some(cfg.vote),
            stop_after: 0,
            election: None,
            trace,
            last_send_round: start_round,
        };
        if let Some(t) = world.trace.as_mut() {
            t.push(start_round, Event::IterationStart);
            for (j, node) in world.nodes.iter().enumerate() {
                let init = if cfg.mode.is_size() {
                    node.mass()
                } else {
                    Mass::new(node.state_y(), node.state_z())
                };
                t.push(start_round, Event::Init { node: j, y: init.y, z: init.z });
            }
        }
        world
    }

    /// Average-degree world after initialization: every node has already sent
    /// `(D+, 1)` (round 0) for delivery in round 1.
    pub fn average_degree<R: RngCore + ?Sized>(
        g: &'g Digraph,
        cfg: &RunConfig,
        rng: &mut R,
        trace: Option<RoundTrace>,
    ) -> Self {
        let dists = distributions(g);
        let mut nodes = Vec::with_capacity(g.node_count());
        let mut sends = Vec::with_capacity(g.node_count());
        for (j, dist) in dists.iter().enumerate() {
            let (node, mass, dst) = NodeState::init_average_degree(dist, rng);
            nodes.push(node);
            sends.push(Envelope { src: j, dst, mass });
        }
        let mut world = Self::base(g, cfg, nodes, 0, trace);
        for env in &sends {
            world.record(0, || Event::Send { src: env.src, dst: env.dst, y: env.mass.y, z: env.mass.z });
        }
        world.in_flight = sends;
        world
    }

    /// Size iteration with the given leader flags, starting after `start_round`.
    pub fn network_size(
        g: &'g Digraph,
        cfg: &RunConfig,
        leaders: &[bool],
        start_round: u64,
        trace: Option<RoundTrace>,
    ) -> Self {
        let nodes = leaders.iter().map(|&l| NodeState::init_network_size(l)).collect();
        Self::base(g, cfg, nodes, start_round, trace)
    }

    /// Every node a provisional leader; the election runs on the same rounds and
    /// stop checks are suppressed until it ends.
    pub fn parallel_correction(g: &'g Digraph, cfg: &RunConfig, trace: Option<RoundTrace>) -> Self {
        let nodes = vec![NodeState::init_network_size(true); g.node_count()];
        let mut world = Self::base(g, cfg, nodes, 0, trace);
        world.rule.correction_tokens = true;
        world.stop_after = cfg.election_rounds();
        world.election = Some(ConcurrentElection {
            rounds: cfg.election_rounds(),
            eta_max: cfg.eta_max.clone(),
        });
        world
    }

    /// No leader, no voting.
    pub fn anonymous(g: &'g Digraph, cfg: &RunConfig, trace: Option<RoundTrace>) -> Self {
        let nodes = vec![NodeState::init_network_size(false); g.node_count()];
        let mut world = Self::base(g, cfg, nodes, 0, trace);
        world.vote = None;
        world
    }

    fn record(&mut self, round: u64, event: impl FnOnce() -> Event) {
        if let Some(t) = self.trace.as_mut() {
            t.push(round, event());
        }
    }

    pub fn graph(&self) -> &'g Digraph {
        self.graph
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn in_flight(&self) -> &[Envelope] {
        &self.in_flight
    }

    pub fn has_voting(&self) -> bool {
        self.vote.is_some()
    }

    pub fn d_prime(&self) -> u64 {
        self.d_prime
    }

    pub fn last_send_round(&self) -> u64 {
        self.last_send_round
    }

    pub fn all_halted(&self) -> bool {
        self.nodes.iter().all(NodeState::halted)
    }

    pub fn election_running(&self) -> bool {
        self.election.as_ref().is_some_and(|e| self.round < e.rounds)
    }

    /// Nothing in flight and no election left to inject corrections: held
    /// mass can never move again.
    pub fn is_frozen(&self) -> bool {
        self.in_flight.is_empty() && !self.election_running()
    }

    /// Held plus in-flight mass.
    pub fn total_mass(&self) -> Mass {
        self.nodes.iter().map(NodeState::mass).sum::<Mass>()
            + self.in_flight.iter().map(|e| e.mass).sum::<Mass>()
    }

    /// Tokens with positive `z`, held or in flight.
    pub fn token_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.mass().z > 0).count()
            + self.in_flight.iter().filter(|e| e.mass.z > 0).count()
    }

    pub fn leader_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.leader_flag()).count()
    }

    pub fn trace_mut(&mut self) -> Option<&mut RoundTrace> {
        self.trace.as_mut()
    }

    pub fn into_trace(self) -> Option<RoundTrace> {
        self.trace
    }

    pub fn step_round<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> RoundSummary {
        let k = self.round + 1;
        let g = self.graph;
        let d_prime = self.d_prime;

        if let Some(source) = self.vote {
            if (k - 1) % d_prime == 0 {
                for node in self.nodes.iter_mut().filter(|n| !n.halted()) {
                    node.vote_reset(source);
                }
            }
            let snapshot: Vec<Option<Vote>> = self
                .nodes
                .iter()
                .map(|n| (!n.halted()).then(|| n.vote()))
                .collect();
            for (j, node) in self.nodes.iter_mut().enumerate() {
                if !node.halted() {
                    node.vote_merge(g.in_neighbors(j).iter().filter_map(|&i| snapshot[i]));
                }
            }
        }

        let mut demoted = Vec::new();
        if let Some(election) = &self.election {
            if k <= election.rounds {
                demoted = election_step(
                    g,
                    &mut self.nodes,
                    k,
                    d_prime,
                    &election.eta_max,
                    rng,
                    self.trace.as_mut(),
                );
            }
        }

        for env in std::mem::take(&mut self.in_flight) {
            if self.nodes[env.dst].halted() {
                self.record(k, || Event::Drop { src: env.src, dst: env.dst, y: env.mass.y, z: env.mass.z });
            } else {
                self.nodes[env.dst].merge_received([env.mass]);
            }
        }
        for &j in &demoted {
            self.nodes[j].inject_correction();
            self.record(k, || Event::Correction { node: j });
        }

        let mut sent = 0;
        for j in 0..self.nodes.len() {
            let node = &mut self.nodes[j];
            if node.halted() {
                continue;
            }
            let refreshes = self.rule.trigger.fires(node.mass().z);
            let out = node.update_state_and_transmit(self.rule, &self.dists[j], rng);
            let (y, z) = (node.state_y(), node.state_z());
            if refreshes {
                self.record(k, || Event::State { node: j, y, z });
            }
            if let Some((dst, mass)) = out {
                self.record(k, || Event::Send { src: j, dst, y: mass.y, z: mass.z });
                self.in_flight.push(Envelope { src: j, dst, mass });
                sent += 1;
            }
        }
        if sent > 0 {
            self.last_send_round = k;
        }

        let mut halted = 0;
        if self.vote.is_some() && k % d_prime == 0 && k > self.stop_after {
            for j in 0..self.nodes.len() {
                let node = &mut self.nodes[j];
                if node.halted() {
                    continue;
                }
                let (min, max) = (node.vote_min(), node.vote_max());
                let stops = node.stop_check();
                self.record(k, || Event::Vote { node: j, min, max });
                if stops {
                    halted += 1;
                    self.record(k, || Event::Halt { node: j });
                }
            }
        }

        self.round = k;
        RoundSummary { round: k, sent, halted }
    }
}
