//! Per-node state machine shared by the average-degree, network-size and
//! leader-election protocols.
//!
//! Every operation is a pure transition on one [`NodeState`] plus explicit
//! inputs. Scheduling and message exchange live in [`crate::engine`].

mod fraction;

use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::ProtocolError;
use crate::rng::uniform_index;

pub use fraction::Fraction;

/// Integer mass pair `(y, z)` carried by a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Mass {
    pub y: i64,
    pub z: i64,
}

impl Mass {
    pub const ZERO: Mass = Mass { y: 0, z: 0 };
    /// Injected by a node that loses a parallel election.
    pub const CORRECTION: Mass = Mass { y: -1, z: 0 };

    pub fn new(y: i64, z: i64) -> Self {
        Mass { y, z }
    }

    pub fn is_zero(self) -> bool {
        self == Mass::ZERO
    }
}

impl Add for Mass {
    type Output = Mass;

    fn add(self, rhs: Mass) -> Mass {
        Mass {
            y: self.y + rhs.y,
            z: self.z + rhs.z,
        }
    }
}

impl AddAssign for Mass {
    fn add_assign(&mut self, rhs: Mass) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for Mass {
    fn sum<I: Iterator<Item = Mass>>(iter: I) -> Mass {
        iter.fold(Mass::ZERO, Add::add)
    }
}

/// Min/max voting pair; on the wire each side is an integer pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub max: Fraction,
    pub min: Fraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Message {
    Mass(Mass),
    Vote(Vote),
    LeaderVal(i64),
}

/// Condition on held `z` mass under which a node refreshes its state and forwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    /// `z >= 1`.
    #[default]
    Geq1,
    /// `z > 1`. Can freeze every token permanently.
    Gt1,
}

impl Trigger {
    pub fn fires(self, z: i64) -> bool {
        match self {
            Trigger::Geq1 => z >= 1,
            Trigger::Gt1 => z > 1,
        }
    }
}

/// What a node votes on at the start of each `D'` cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteSource {
    /// `y^s / z^s`.
    #[default]
    Ratio,
    /// `y^s / 1`.
    Numerator,
}

macro_rules! str_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(format!(
                        "unknown {} {other:?}; expected one of: {}",
                        stringify!($ty),
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
    };
}
pub(crate) use str_enum;

str_enum!(Trigger { Geq1 => "geq1", Gt1 => "gt1" });
str_enum!(VoteSource { Ratio => "ratio", Numerator => "numerator" });

/// Transmission policy for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TransmitRule {
    pub trigger: Trigger,
    /// Also forward held mass with `y != 0` regardless of `z`.
    pub correction_tokens: bool,
}

/// Uniform choice over the out-neighbors followed by the node itself.
///
/// Each target has probability `1 / (1 + out_degree)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetDistribution {
    targets: Vec<usize>,
}

impl TargetDistribution {
    pub fn new(node: usize, out_neighbors: &[usize]) -> Result<Self, ProtocolError> {
        if out_neighbors.is_empty() {
            return Err(ProtocolError::NoOutNeighbors);
        }
        let mut targets = out_neighbors.to_vec();
        targets.push(node);
        Ok(TargetDistribution { targets })
    }

    pub fn out_degree(&self) -> usize {
        self.targets.len() - 1
    }

    /// Out-neighbors in order, then the node itself.
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn probability(&self) -> Fraction {
        Fraction::new(1, self.targets.len() as i64)
    }

    /// `(target, probability)` for every nonzero entry.
    pub fn entries(&self) -> impl Iterator<Item = (usize, Fraction)> + '_ {
        let p = self.probability();
        self.targets.iter().map(move |&t| (t, p))
    }

    /// Consumes exactly one draw.
    pub fn choose<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        self.targets[uniform_index(rng, self.targets.len())]
    }
}

/// Per-node protocol state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeState {
    mass: Mass,
    state: Fraction,
    vote_min: Fraction,
    vote_max: Fraction,
    leader_flag: bool,
    eta: i64,
    leader_max: i64,
    halted: bool,
}

impl NodeState {
    fn with_state(mass: Mass, state: Fraction, leader_flag: bool) -> Self {
        NodeState {
            mass,
            state,
            vote_min: state,
            vote_max: state,
            leader_flag,
            eta: -1,
            leader_max: -1,
            halted: false,
        }
    }

    /// Average-degree start: state `D+/1`; the initial mass `(D+, 1)` is sent
    /// straight away and the node keeps nothing.
    pub fn init_average_degree<R: RngCore + ?Sized>(
        dist: &TargetDistribution,
        rng: &mut R,
    ) -> (Self, Mass, usize) {
        let degree = dist.out_degree() as i64;
        let initial = Mass::new(degree, 1);
        let node = Self::with_state(Mass::ZERO, Fraction::new(degree, 1), false);
        (node, initial, dist.choose(rng))
    }

    /// Network-size start: leaders hold `(1, 1)`, followers `(0, 1)`.
    pub fn init_network_size(is_leader: bool) -> Self {
        let y = i64::from(is_leader);
        Self::with_state(Mass::new(y, 1), Fraction::new(y, 1), is_leader)
    }

    /// Election-only node: flag set, no mass.
    pub fn election_candidate() -> Self {
        Self::with_state(Mass::ZERO, Fraction::integer(0), true)
    }

    pub fn mass(&self) -> Mass {
        self.mass
    }

    pub fn state_y(&self) -> i64 {
        self.state.numer()
    }

    pub fn state_z(&self) -> i64 {
        self.state.denom()
    }

    pub fn state_q(&self) -> Fraction {
        self.state
    }

    pub fn vote(&self) -> Vote {
        Vote {
            max: self.vote_max,
            min: self.vote_min,
        }
    }

    pub fn vote_min(&self) -> Fraction {
        self.vote_min
    }

    pub fn vote_max(&self) -> Fraction {
        self.vote_max
    }

    pub fn leader_flag(&self) -> bool {
        self.leader_flag
    }

    pub fn eta(&self) -> i64 {
        self.eta
    }

    pub fn leader_max(&self) -> i64 {
        self.leader_max
    }

    pub fn halted(&self) -> bool {
        self.halted
    }

    pub fn merge_received<I: IntoIterator<Item = Mass>>(&mut self, delivered: I) {
        debug_assert!(!self.halted);
        for m in delivered {
            self.mass += m;
        }
    }

    /// Adds a `(-1, 0)` correction token to the held mass.
    pub fn inject_correction(&mut self) {
        self.mass += Mass::CORRECTION;
    }

    /// Refreshes the state from held mass and forwards it when the rule fires.
    ///
    /// Returns the chosen target and the mass sent; held mass is zeroed on send.
    pub fn update_state_and_transmit<R: RngCore + ?Sized>(
        &mut self,
        rule: TransmitRule,
        dist: &TargetDistribution,
        rng: &mut R,
    ) -> Option<(usize, Mass)> {
        if self.halted {
            return None;
        }
        let fires = rule.trigger.fires(self.mass.z);
        if fires {
            self.state = Fraction::new(self.mass.y, self.mass.z);
        }
        let sends = fires || (rule.correction_tokens && self.mass.y != 0);
        if !sends {
            return None;
        }
        let sent = std::mem::take(&mut self.mass);
        Some((dist.choose(rng), sent))
    }

    pub fn vote_reset(&mut self, source: VoteSource) {
        let v = match source {
            VoteSource::Ratio => self.state,
            VoteSource::Numerator => Fraction::integer(self.state.numer()),
        };
        self.vote_min = v;
        self.vote_max = v;
    }

    pub fn vote_merge<I: IntoIterator<Item = Vote>>(&mut self, received: I) {
        for v in received {
            if v.max > self.vote_max {
                self.vote_max = v.max;
            }
            if v.min < self.vote_min {
                self.vote_min = v.min;
            }
        }
    }

    /// Halts the node when `max == min`.
    pub fn stop_check(&mut self) -> bool {
        if self.vote_max == self.vote_min {
            self.halted = true;
        }
        self.halted
    }

    /// Active nodes draw `eta` uniformly from `0..=eta_max`; followers take `-1`.
    pub fn leader_round_reset<R: RngCore + ?Sized>(
        &mut self,
        eta_max: u64,
        rng: &mut R,
    ) -> Result<(), ProtocolError> {
        if eta_max < 1 {
            return Err(ProtocolError::EtaMaxTooSmall(eta_max));
        }
        self.eta = if self.leader_flag {
            let levels = usize::try_from(eta_max).map_or(usize::MAX, |m| m.saturating_add(1));
            uniform_index(rng, levels) as i64
        } else {
            -1
        };
        self.leader_max = self.eta;
        Ok(())
    }

    pub fn leader_max_step<I: IntoIterator<Item = i64>>(&mut self, received: I) {
        for v in received {
            self.leader_max = self.leader_max.max(v);
        }
    }

    /// Clears the flag unless this node drew the maximum. Returns `true` on demotion.
    pub fn leader_round_conclude(&mut self) -> bool {
        let demoted = self.leader_flag && self.leader_max != self.eta;
        if demoted {
            self.leader_flag = false;
        }
        demoted
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{trial_rng, ConstantRng};
    use proptest::prelude::*;

    const GEQ1: TransmitRule = TransmitRule {
        trigger: Trigger::Geq1,
        correction_tokens: false,
    };
    const GT1: TransmitRule = TransmitRule {
        trigger: Trigger::Gt1,
        correction_tokens: false,
    };
    const CORR: TransmitRule = TransmitRule {
        trigger: Trigger::Geq1,
        correction_tokens: true,
    };

    fn node_with_mass(y: i64, z: i64) -> NodeState {
        let mut n = NodeState::init_network_size(false);
        n.mass = Mass::new(y, z);
        n
    }

    #[test]
    fn probabilities_are_uniform_including_self() {
        let d = TargetDistribution::new(0, &[1, 2, 3]).unwrap();
        assert_eq!(d.targets(), &[1, 2, 3, 0]);
        assert!(d.entries().all(|(_, p)| p == Fraction::new(1, 4)));
        let d = TargetDistribution::new(5, &[2]).unwrap();
        assert_eq!(d.entries().collect::<Vec<_>>(), vec![(2, Fraction::new(1, 2)), (5, Fraction::new(1, 2))]);
        assert_eq!(
            TargetDistribution::new(0, &[]),
            Err(ProtocolError::NoOutNeighbors)
        );
        for deg in 1..=50usize {
            let outs: Vec<usize> = (1..=deg).collect();
            let d = TargetDistribution::new(0, &outs).unwrap();
            let p = d.probability();
            assert_eq!(p.numer() * d.entries().count() as i64, p.denom());
            assert_eq!(d.entries().count(), deg + 1);
        }
    }

    #[test]
    fn average_degree_init() {
        let outs: Vec<usize> = (1..=7).collect();
        let d = TargetDistribution::new(0, &outs).unwrap();
        let (n, m, target) = NodeState::init_average_degree(&d, &mut trial_rng(1));
        assert_eq!((n.state_y(), n.state_z()), (7, 1));
        assert_eq!(m, Mass::new(7, 1));
        assert!(n.mass().is_zero());
        let (_, _, again) = NodeState::init_average_degree(&d, &mut trial_rng(1));
        assert_eq!(target, again);

        let d = TargetDistribution::new(0, &[1]).unwrap();
        let (n, m, _) = NodeState::init_average_degree(&d, &mut trial_rng(1));
        assert_eq!((n.state_y(), n.state_z(), m), (1, 1, Mass::new(1, 1)));
    }

    #[test]
    fn network_size_init() {
        let leader = NodeState::init_network_size(true);
        assert_eq!((leader.mass(), leader.state_y(), leader.state_z()), (Mass::new(1, 1), 1, 1));
        assert!(leader.leader_flag());
        let follower = NodeState::init_network_size(false);
        assert_eq!((follower.mass(), follower.state_y(), follower.state_z()), (Mass::new(0, 1), 0, 1));
        let nodes: Vec<_> = (0..20).map(|i| NodeState::init_network_size(i == 3)).collect();
        let total: Mass = nodes.iter().map(NodeState::mass).sum();
        assert_eq!(total, Mass::new(1, 20));
    }

    #[test]
    fn merge_sums_delivered_mass() {
        let mut n = node_with_mass(0, 0);
        n.merge_received([Mass::new(3, 1), Mass::new(5, 2)]);
        assert_eq!(n.mass(), Mass::new(8, 3));
        let mut n = node_with_mass(2, 1);
        n.merge_received([]);
        assert_eq!(n.mass(), Mass::new(2, 1));
        let mut n = node_with_mass(4, 2);
        n.merge_received([Mass::CORRECTION]);
        assert_eq!(n.mass(), Mass::new(3, 2));
    }

    #[test]
    fn transmit_under_geq1() {
        let d = TargetDistribution::new(0, &[1, 2]).unwrap();
        let mut n = node_with_mass(8, 3);
        let (_, sent) = n.update_state_and_transmit(GEQ1, &d, &mut trial_rng(0)).unwrap();
        assert_eq!(sent, Mass::new(8, 3));
        assert!(n.state_q().identical(Fraction::new(8, 3)));
        assert!(n.mass().is_zero());

        let mut n = node_with_mass(0, 0);
        let before = n.clone();
        assert!(n.update_state_and_transmit(GEQ1, &d, &mut trial_rng(0)).is_none());
        assert_eq!(n, before);
    }

    #[test]
    fn gt1_retains_unit_mass() {
        let d = TargetDistribution::new(0, &[1]).unwrap();
        let mut n = node_with_mass(1, 1);
        let before = n.clone();
        assert!(n.update_state_and_transmit(GT1, &d, &mut trial_rng(0)).is_none());
        assert_eq!(n, before);
        n.merge_received([Mass::new(2, 1)]);
        assert!(n.update_state_and_transmit(GT1, &d, &mut trial_rng(0)).is_some());
        assert_eq!((n.state_y(), n.state_z()), (3, 2));
    }

    #[test]
    fn correction_tokens_travel_without_state_update() {
        let d = TargetDistribution::new(0, &[1]).unwrap();
        let mut n = node_with_mass(-1, 0);
        let state_before = n.state_q();
        let (_, sent) = n.update_state_and_transmit(CORR, &d, &mut trial_rng(0)).unwrap();
        assert_eq!(sent, Mass::CORRECTION);
        assert!(n.state_q().identical(state_before));
        // without the extension the same mass is stuck
        let mut n = node_with_mass(-1, 0);
        assert!(n.update_state_and_transmit(GEQ1, &d, &mut trial_rng(0)).is_none());
    }

    #[test]
    fn self_loop_stub_sends_to_self() {
        let d = TargetDistribution::new(4, &[0, 1, 2]).unwrap();
        let mut n = node_with_mass(1, 1);
        let (target, _) = n.update_state_and_transmit(GEQ1, &d, &mut ConstantRng::self_loop()).unwrap();
        assert_eq!(target, 4);
    }

    #[test]
    fn vote_reset_sources() {
        let mut n = node_with_mass(206, 20);
        n.update_state_and_transmit(GEQ1, &TargetDistribution::new(0, &[1]).unwrap(), &mut trial_rng(0));
        n.vote_reset(VoteSource::Ratio);
        assert!(n.vote_max().identical(Fraction::new(206, 20)));
        assert!(n.vote_min().identical(Fraction::new(206, 20)));
        let once = n.vote();
        n.vote_reset(VoteSource::Ratio);
        assert_eq!(n.vote(), once);

        let mut n = node_with_mass(1, 20);
        n.update_state_and_transmit(GEQ1, &TargetDistribution::new(0, &[1]).unwrap(), &mut trial_rng(0));
        n.vote_reset(VoteSource::Numerator);
        assert!(n.vote_max().identical(Fraction::new(1, 1)));
        assert!(n.vote_min().identical(Fraction::new(1, 1)));
    }

    fn voter(v: Fraction) -> NodeState {
        let mut n = NodeState::init_network_size(false);
        n.vote_min = v;
        n.vote_max = v;
        n
    }

    #[test]
    fn vote_merge_uses_exact_comparison() {
        let mut n = voter(Fraction::new(3, 2));
        let a = Fraction::new(10, 7);
        let b = Fraction::new(3, 2);
        n.vote_merge([Vote { max: a, min: a }, Vote { max: b, min: b }]);
        assert_eq!(n.vote_max(), Fraction::new(3, 2));
        assert_eq!(n.vote_min(), Fraction::new(10, 7));

        let mut n = voter(Fraction::new(2, 4));
        let half = Fraction::new(1, 2);
        n.vote_merge([Vote { max: half, min: half }]);
        assert_eq!(n.vote_max(), n.vote_min());

        let mut n = voter(Fraction::new(5, 3));
        let before = n.vote();
        n.vote_merge([]);
        assert_eq!(n.vote(), before);
    }

    #[test]
    fn stop_check_cases() {
        let mut n = voter(Fraction::new(206, 20));
        assert!(n.stop_check());
        assert!(n.halted());
        let d = TargetDistribution::new(0, &[1]).unwrap();
        n.mass = Mass::new(5, 5);
        assert!(n.update_state_and_transmit(GEQ1, &d, &mut trial_rng(0)).is_none());

        let mut n = voter(Fraction::integer(0));
        n.vote_max = Fraction::integer(1);
        assert!(!n.stop_check());
        assert!(!n.halted());

        let mut n = voter(Fraction::new(1, 2));
        n.vote_max = Fraction::new(2, 4);
        assert!(n.stop_check());
    }

    #[test]
    fn leader_round_draws() {
        let mut n = NodeState::election_candidate();
        let mut rng = trial_rng(9);
        for _ in 0..200 {
            n.leader_round_reset(15, &mut rng).unwrap();
            assert!((0..=15).contains(&n.eta()));
            assert_eq!(n.leader_max(), n.eta());
        }
        let mut a = NodeState::election_candidate();
        let mut b = NodeState::election_candidate();
        a.leader_round_reset(255, &mut trial_rng(4)).unwrap();
        b.leader_round_reset(255, &mut trial_rng(4)).unwrap();
        assert_eq!(a.eta(), b.eta());

        let mut f = NodeState::init_network_size(false);
        f.leader_round_reset(15, &mut rng).unwrap();
        assert_eq!((f.eta(), f.leader_max()), (-1, -1));
        assert_eq!(
            n.leader_round_reset(0, &mut rng),
            Err(ProtocolError::EtaMaxTooSmall(0))
        );
    }

    #[test]
    fn leader_max_and_conclude() {
        let mut n = NodeState::election_candidate();
        n.eta = 7;
        n.leader_max = 7;
        n.leader_max_step([3, -1]);
        assert_eq!(n.leader_max(), 7);
        assert!(!n.leader_round_conclude());
        assert!(n.leader_flag());

        let mut f = NodeState::init_network_size(false);
        f.leader_max_step([12]);
        assert_eq!(f.leader_max(), 12);

        let mut n = NodeState::election_candidate();
        n.eta = 3;
        n.leader_max = 3;
        n.leader_max_step([7]);
        assert!(n.leader_round_conclude());
        assert!(!n.leader_flag());

        // tie: both keep the flag
        let mut a = NodeState::election_candidate();
        let mut b = NodeState::election_candidate();
        a.leader_round_reset(15, &mut ConstantRng(1 << 63)).unwrap();
        b.leader_round_reset(15, &mut ConstantRng(1 << 63)).unwrap();
        let (ea, eb) = (a.leader_max(), b.leader_max());
        a.leader_max_step([eb]);
        b.leader_max_step([ea]);
        assert!(!a.leader_round_conclude() && !b.leader_round_conclude());
    }

    /// Synchronous max rounds over all eta assignments on the directed 3-cycle.
    #[test]
    fn max_step_reaches_global_max_on_three_cycle() {
        let in_nbr = [2usize, 0, 1];
        for code in 0..27 {
            let etas = [code % 3, (code / 3) % 3, code / 9].map(|v| v as i64);
            let mut nodes: Vec<NodeState> = etas
                .iter()
                .map(|&e| {
                    let mut n = NodeState::election_candidate();
                    n.eta = e;
                    n.leader_max = e;
                    n
                })
                .collect();
            for _ in 0..2 {
                let snapshot: Vec<i64> = nodes.iter().map(NodeState::leader_max).collect();
                for (j, n) in nodes.iter_mut().enumerate() {
                    n.leader_max_step([snapshot[in_nbr[j]]]);
                }
            }
            let global = *etas.iter().max().unwrap();
            assert!(nodes.iter().all(|n| n.leader_max() == global), "{etas:?}");
            for n in &mut nodes {
                n.leader_round_conclude();
            }
            let leaders = nodes.iter().filter(|n| n.leader_flag()).count();
            assert_eq!(leaders, etas.iter().filter(|&&e| e == global).count());
        }
    }

    fn frac() -> impl Strategy<Value = Fraction> {
        (-50i64..50, 1i64..20).prop_map(|(n, d)| Fraction::new(n, d))
    }

    proptest! {
        #[test]
        fn vote_merge_is_order_independent_and_idempotent(own in frac(), votes in proptest::collection::vec(frac(), 0..8)) {
            let msgs: Vec<Vote> = votes.iter().map(|&v| Vote { max: v, min: v }).collect();
            let mut a = voter(own);
            a.vote_merge(msgs.iter().copied());
            let mut b = voter(own);
            b.vote_merge(msgs.iter().rev().copied());
            prop_assert_eq!(a.vote_max(), b.vote_max());
            prop_assert_eq!(a.vote_min(), b.vote_min());
            let once = (a.vote_max(), a.vote_min());
            a.vote_merge(msgs.iter().copied());
            prop_assert_eq!((a.vote_max(), a.vote_min()), once);
            let expect_max = votes.iter().copied().chain([own]).max().unwrap();
            let expect_min = votes.iter().copied().chain([own]).min().unwrap();
            prop_assert_eq!(a.vote_max(), expect_max);
            prop_assert_eq!(a.vote_min(), expect_min);
        }

        #[test]
        fn transmit_conserves_mass(y in -5i64..50, z in 0i64..20, seed in any::<u64>(), gt1 in any::<bool>(), corr in any::<bool>()) {
            let rule = TransmitRule { trigger: if gt1 { Trigger::Gt1 } else { Trigger::Geq1 }, correction_tokens: corr };
            let d = TargetDistribution::new(0, &[1, 2, 3]).unwrap();
            let mut n = node_with_mass(y, z);
            let sent = n.update_state_and_transmit(rule, &d, &mut trial_rng(seed)).map(|(_, m)| m).unwrap_or_default();
            prop_assert_eq!(sent + n.mass(), Mass::new(y, z));
            prop_assert!(n.state_z() >= 1);
        }
    }
}
