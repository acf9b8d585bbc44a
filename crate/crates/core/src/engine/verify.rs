//! Ground-truth checks and trace replay.

use std::fmt;

use serde::Serialize;

use super::config::Mode;
use super::result::{Outcome, TrialResult};
use super::run::{final_correct, target_holds};
use super::trace::{Event, RoundTrace};
use crate::graph::Digraph;
use crate::protocol::{Fraction, Mass, Trigger};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    WrongValue,
    NotHalted,
    Deadlock,
    HaltRoundMisaligned,
    HaltBeforeConvergence,
    LateHalt,
    NonSimultaneousHalt,
    MassNotConserved,
    TokenCountIncreased,
    InconsistentTrace,
    MultipleLeaders,
    ResultMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub round: Option<u64>,
    pub node: Option<usize>,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.kind)?;
        if let Some(r) = self.round {
            write!(f, " at round {r}")?;
        }
        if let Some(n) = self.node {
            write!(f, " node {n}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, round: Option<u64>, node: Option<usize>, kind: ViolationKind, detail: impl Into<String>) {
        self.violations.push(Violation { round, node, kind, detail: detail.into() });
    }
}

/// What a trace replay reconstructs.
#[derive(Debug, Clone)]
pub struct Replay {
    pub result: TrialResult,
    pub d_prime: u64,
    /// Held plus in-flight mass at the end of each iteration round.
    pub mass_totals: Vec<(u64, Mass)>,
    /// Nonzero-`z` tokens at the end of each iteration round.
    pub token_counts: Vec<(u64, usize)>,
    /// Every node's `(y^s, z^s)` at the end of each iteration round.
    pub state_history: Vec<(u64, Vec<(i64, i64)>)>,
    pub findings: VerifyReport,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("trace does not start with a header")]
    MissingHeader,
    #[error("trace has {found} nodes, graph has {expected}")]
    NodeCountMismatch { found: usize, expected: usize },
    #[error("node {0} out of range")]
    NodeOutOfRange(usize),
    #[error("round {found} after round {previous}")]
    RoundsOutOfOrder { previous: u64, found: u64 },
    #[error("trace has no end event")]
    MissingEnd,
}

struct ReplayState<'g> {
    g: &'g Digraph,
    mode: Mode,
    trigger: Trigger,
    held: Vec<Mass>,
    state: Vec<(i64, i64)>,
    pending: Vec<(usize, usize, Mass)>,
    halted: Vec<Option<u64>>,
    flags: Vec<bool>,
    demoted_now: Vec<bool>,
    expected_y: i64,
    converged: Option<u64>,
    last_send_round: u64,
    prev_tokens: Option<usize>,
    /// Round of `IterationStart`; size modes do not transmit in it.
    start_round: u64,
    out: Replay,
}

impl ReplayState<'_> {
    fn finding(&mut self, round: u64, node: Option<usize>, kind: ViolationKind, detail: impl Into<String>) {
        self.out.findings.push(Some(round), node, kind, detail);
    }

    fn begin_round(&mut self) {
        for (_, dst, m) in std::mem::take(&mut self.pending) {
            if self.halted[dst].is_none() {
                self.held[dst] += m;
            }
        }
        self.demoted_now.iter_mut().for_each(|d| *d = false);
    }

    fn finish_round(&mut self, k: u64) {
        if k > self.start_round || self.mode == Mode::AvgDegree {
            for j in 0..self.held.len() {
                let m = self.held[j];
                let running = self.halted[j].is_none_or(|h| h >= k);
                let fires = self.trigger.fires(m.z) || (self.mode == Mode::SizeParCorrection && m.y != 0);
                if running && fires {
                    self.finding(
                        k,
                        Some(j),
                        ViolationKind::InconsistentTrace,
                        format!("held mass ({}, {}) was not forwarded", m.y, m.z),
                    );
                }
            }
        }
        let total = self.held.iter().copied().sum::<Mass>()
            + self.pending.iter().map(|p| p.2).sum::<Mass>();
        // mass delivered to halted nodes leaves the system
        if self.halted.iter().all(|h| h.is_none_or(|r| r >= k)) {
            let expected = Mass::new(self.expected_y, self.g.node_count() as i64);
            if total != expected {
                self.finding(
                    k,
                    None,
                    ViolationKind::MassNotConserved,
                    format!("total mass ({}, {}) expected ({}, {})", total.y, total.z, expected.y, expected.z),
                );
            }
        }
        self.out.mass_totals.push((k, total));
        let tokens = self.held.iter().filter(|m| m.z > 0).count()
            + self.pending.iter().filter(|p| p.2.z > 0).count();
        if self.trigger == Trigger::Geq1 {
            if let Some(prev) = self.prev_tokens {
                if tokens > prev {
                    self.finding(k, None, ViolationKind::TokenCountIncreased, format!("{prev} -> {tokens} tokens"));
                }
            }
        }
        self.prev_tokens = Some(tokens);
        self.out.token_counts.push((k, tokens));
        self.out.state_history.push((k, self.state.clone()));
        if target_holds(self.mode, self.g, self.state.iter().copied()) {
            self.converged.get_or_insert(k);
        } else {
            self.converged = None;
        }
    }
}

fn node_checked(node: usize, n: usize) -> Result<usize, ReplayError> {
    if node < n {
        Ok(node)
    } else {
        Err(ReplayError::NodeOutOfRange(node))
    }
}

/// Re-executes the mass bookkeeping recorded in `trace` and rebuilds the
/// trial result. Protocol-level inconsistencies become findings; structural
/// problems are errors.
pub fn replay(g: &Digraph, trace: &RoundTrace) -> Result<Replay, ReplayError> {
    let events = trace.events();
    let Some(first) = events.first() else {
        return Err(ReplayError::MissingHeader);
    };
    let Event::Header { mode, n, d_prime, u_v, trigger, assigned_leaders } = &first.event else {
        return Err(ReplayError::MissingHeader);
    };
    let (mode, n, d_prime, trigger) = (*mode, *n, *d_prime, *trigger);
    if n != g.node_count() {
        return Err(ReplayError::NodeCountMismatch { found: n, expected: g.node_count() });
    }
    let election_rounds = u64::from(*u_v) * d_prime;
    let mut flags = vec![mode == Mode::SizeParCorrection || mode.runs_election(); n];
    if let Some(list) = assigned_leaders {
        flags = vec![false; n];
        for &l in list {
            flags[node_checked(l, n)?] = true;
        }
    }
    let expected_y = match mode {
        Mode::AvgDegree => g.total_out_degree() as i64,
        Mode::SizeParCorrection => n as i64,
        _ => 0,
    };
    let mut st = ReplayState {
        g,
        mode,
        trigger,
        held: vec![Mass::ZERO; n],
        state: vec![(0, 1); n],
        pending: Vec::new(),
        halted: vec![None; n],
        flags,
        demoted_now: vec![false; n],
        expected_y,
        converged: None,
        last_send_round: 0,
        prev_tokens: None,
        start_round: 0,
        out: Replay {
            result: TrialResult {
                mode,
                steps_converged: None,
                steps_halted: None,
                final_states: Vec::new(),
                correct: false,
                leader_count: 0,
                deadlocked: false,
                outcome: Outcome::MaxSteps,
                last_send_round: 0,
            },
            d_prime,
            mass_totals: Vec::new(),
            token_counts: Vec::new(),
            state_history: Vec::new(),
            findings: VerifyReport::default(),
        },
    };

    let mut iterating = false;
    let mut cur = 0u64;
    let mut end: Option<(u64, Outcome)> = None;
    let mut last_round = 0u64;
    for ev in &events[1..] {
        let k = ev.round;
        if k < last_round && !matches!(ev.event, Event::IterationStart) {
            return Err(ReplayError::RoundsOutOfOrder { previous: last_round, found: k });
        }
        last_round = k;
        if iterating && k > cur && !matches!(ev.event, Event::End { .. } | Event::Deadlock { .. }) {
            while cur < k {
                st.finish_round(cur);
                cur += 1;
                st.begin_round();
            }
        }
        match &ev.event {
            Event::Header { .. } => {
                st.finding(k, None, ViolationKind::InconsistentTrace, "second header");
            }
            Event::Draw { node, eta } => {
                let j = node_checked(*node, n)?;
                if !st.flags[j] || *eta < 0 {
                    st.finding(k, Some(j), ViolationKind::InconsistentTrace, "draw by a follower");
                }
            }
            Event::Elect { node, eta, leader_max, flag } => {
                let j = node_checked(*node, n)?;
                if *flag != (st.flags[j] && eta == leader_max) {
                    st.finding(k, Some(j), ViolationKind::InconsistentTrace, "flag does not follow the election rule");
                }
                if st.flags[j] && !*flag {
                    st.demoted_now[j] = true;
                    if mode == Mode::SizeParCorrection {
                        st.expected_y -= 1;
                    }
                }
                st.flags[j] = *flag;
            }
            Event::IterationStart => {
                // oracle-seeded iterations restart the round count
                last_round = k;
                iterating = true;
                cur = k;
                st.start_round = k;
                if mode.runs_election() && mode != Mode::SizeParCorrection {
                    st.expected_y = st.flags.iter().filter(|&&f| f).count() as i64;
                }
            }
            Event::Init { node, y, z } => {
                let j = node_checked(*node, n)?;
                st.held[j] = Mass::new(*y, *z);
                st.state[j] = (*y, *z);
            }
            Event::Correction { node } => {
                let j = node_checked(*node, n)?;
                if !st.demoted_now[j] {
                    st.finding(k, Some(j), ViolationKind::InconsistentTrace, "correction without demotion");
                }
                st.held[j] += Mass::CORRECTION;
            }
            Event::Drop { dst, .. } => {
                let j = node_checked(*dst, n)?;
                if st.halted[j].is_none() {
                    st.finding(k, Some(j), ViolationKind::InconsistentTrace, "drop at a running node");
                }
            }
            Event::State { node, y, z } => {
                let j = node_checked(*node, n)?;
                let held = st.held[j];
                if held != Mass::new(*y, *z) || *z < 1 {
                    st.finding(
                        k,
                        Some(j),
                        ViolationKind::InconsistentTrace,
                        format!("state ({y}, {z}) but held mass ({}, {})", held.y, held.z),
                    );
                }
                st.state[j] = (*y, *z);
            }
            Event::Send { src, dst, y, z } => {
                let j = node_checked(*src, n)?;
                let d = node_checked(*dst, n)?;
                let held = st.held[j];
                if held != Mass::new(*y, *z) {
                    st.finding(
                        k,
                        Some(j),
                        ViolationKind::InconsistentTrace,
                        format!("sent ({y}, {z}) while holding ({}, {})", held.y, held.z),
                    );
                }
                if st.halted[j].is_some() {
                    st.finding(k, Some(j), ViolationKind::InconsistentTrace, "halted node sent");
                }
                if d != j && !g.out_neighbors(j).contains(&d) {
                    st.finding(k, Some(j), ViolationKind::InconsistentTrace, format!("send to non-neighbor {d}"));
                }
                st.held[j] = Mass::ZERO;
                st.pending.push((j, d, Mass::new(*y, *z)));
                st.last_send_round = k;
            }
            Event::Vote { node, min, max } => {
                node_checked(*node, n)?;
                let _ = (min, max);
            }
            Event::Halt { node } => {
                let j = node_checked(*node, n)?;
                if k % d_prime != 0 {
                    st.finding(k, Some(j), ViolationKind::HaltRoundMisaligned, format!("halt not a multiple of D' = {d_prime}"));
                }
                st.halted[j] = Some(k);
            }
            Event::Deadlock { last_send_round } => {
                st.out.result.deadlocked = true;
                if *last_send_round != st.last_send_round {
                    st.finding(k, None, ViolationKind::InconsistentTrace, "deadlock reports a different last send");
                }
            }
            Event::End { outcome } => {
                end = Some((k, *outcome));
            }
        }
    }
    let Some((end_round, outcome)) = end else {
        return Err(ReplayError::MissingEnd);
    };
    if iterating {
        while cur < end_round {
            st.finish_round(cur);
            cur += 1;
            st.begin_round();
        }
        st.finish_round(cur);
    }

    let halt_rounds: Vec<u64> = st.halted.iter().flatten().copied().collect();
    if let (Some(lo), Some(hi)) = (halt_rounds.iter().min(), halt_rounds.iter().max()) {
        if lo != hi || halt_rounds.len() != n {
            st.finding(*hi, None, ViolationKind::NonSimultaneousHalt, format!("{} nodes halted between rounds {lo} and {hi}", halt_rounds.len()));
        }
    }
    let mut halted = (halt_rounds.len() == n).then(|| halt_rounds.iter().copied().max().unwrap_or(0));
    let mut converged = st.converged;
    if mode == Mode::SizeParOracle && assigned_leaders.is_none() {
        halted = halted.map(|h| h.max(election_rounds));
        converged = converged.map(|c| c.max(election_rounds));
    }
    let leader_count = match mode {
        Mode::AvgDegree | Mode::SizeAnonymous => 0,
        _ => st.flags.iter().filter(|&&f| f).count(),
    };
    let final_states = st.state.clone();
    st.out.result = TrialResult {
        mode,
        steps_converged: converged,
        steps_halted: halted,
        correct: final_correct(mode, g, outcome, &final_states),
        final_states,
        leader_count,
        deadlocked: st.out.result.deadlocked,
        outcome,
        last_send_round: st.last_send_round,
    };
    Ok(st.out)
}

/// Checks a finished trial against ground truth; with a trace also replays it.
pub fn ground_truth_verify(g: &Digraph, d_prime: u64, result: &TrialResult, trace: Option<&RoundTrace>) -> VerifyReport {
    let mut report = VerifyReport::default();
    let n = g.node_count() as i64;
    match result.outcome {
        Outcome::Deadlock => report.push(
            Some(result.last_send_round),
            None,
            ViolationKind::Deadlock,
            format!("no transmissions after round {}, not converged", result.last_send_round),
        ),
        Outcome::MaxSteps => report.push(None, None, ViolationKind::NotHalted, "step budget exhausted before stopping"),
        _ => {}
    }
    for (j, &(y, z)) in result.final_states.iter().enumerate() {
        let ok = match result.mode {
            Mode::AvgDegree => z >= 1 && Fraction::new(y, z) == Fraction::new(g.total_out_degree() as i64, n),
            _ => z == n,
        };
        if !ok {
            let want = match result.mode {
                Mode::AvgDegree => format!("{}/{n}", g.total_out_degree()),
                _ => format!("z = {n}"),
            };
            report.push(result.steps(), Some(j), ViolationKind::WrongValue, format!("final ({y}, {z}), expected {want}"));
        }
    }
    if let Some(h) = result.steps_halted {
        if h % d_prime != 0 {
            report.push(Some(h), None, ViolationKind::HaltRoundMisaligned, format!("halt not a multiple of D' = {d_prime}"));
        }
        match result.steps_converged {
            Some(c) if c > h => report.push(Some(h), None, ViolationKind::HaltBeforeConvergence, format!("halted at {h}, converged at {c}")),
            Some(c) if h - c > 2 * d_prime && result.mode != Mode::SizeParCorrection => {
                report.push(Some(h), None, ViolationKind::LateHalt, format!("halt {} rounds after convergence", h - c))
            }
            None => report.push(Some(h), None, ViolationKind::HaltBeforeConvergence, "halted without convergence"),
            _ => {}
        }
    }
    if matches!(result.mode, Mode::SizeSeq | Mode::SizeParOracle) && result.leader_count > 1 {
        report.push(None, None, ViolationKind::MultipleLeaders, format!("{} leaders", result.leader_count));
    }
    if let Some(trace) = trace {
        match replay(g, trace) {
            Ok(r) => {
                report.violations.extend(r.findings.violations);
                if r.result != *result {
                    report.push(None, None, ViolationKind::ResultMismatch, "replayed result differs from the reported one");
                }
            }
            Err(e) => report.push(None, None, ViolationKind::InconsistentTrace, e.to_string()),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::config::{DPrime, RunConfig, SimConfig};
    use crate::engine::run::run_trial;
    use crate::rng::{trial_rng, ConstantRng};

    fn cfg(g: &Digraph, mode: Mode, d: u64) -> RunConfig {
        SimConfig { mode, d_prime: DPrime::Fixed(d), u_v: 5, ..SimConfig::default() }.resolve(g).unwrap()
    }

    #[test]
    fn clean_trials_replay_exactly() {
        let g = Digraph::complete(5).unwrap();
        for mode in [Mode::AvgDegree, Mode::SizeSeq, Mode::SizeParOracle, Mode::SizeParCorrection, Mode::SizeAnonymous] {
            let c = cfg(&g, mode, 1);
            let run = run_trial(&g, &c, &mut trial_rng(17), true);
            let trace = run.trace.as_ref().unwrap();
            let rep = replay(&g, trace).unwrap();
            assert_eq!(rep.result, run.result, "{mode}");
            let report = ground_truth_verify(&g, c.d_prime, &run.result, Some(trace));
            assert!(report.is_clean() || !run.result.correct, "{mode}: {:?}", report.violations);
        }
    }

    #[test]
    fn forged_final_state_is_flagged() {
        let g = Digraph::cycle(3).unwrap();
        let c = cfg(&g, Mode::SizeSeq, 2);
        let c = RunConfig { assigned_leaders: Some(vec![0]), ..c };
        let mut r = run_trial(&g, &c, &mut trial_rng(1), false).result;
        assert!(ground_truth_verify(&g, c.d_prime, &r, None).is_clean());
        r.final_states[1] = (1, 2);
        let rep = ground_truth_verify(&g, c.d_prime, &r, None);
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].node, Some(1));
        assert_eq!(rep.violations[0].kind, ViolationKind::WrongValue);
    }

    #[test]
    fn deadlock_finding() {
        let g = Digraph::from_edges(3, [(0, 1), (0, 2), (1, 0), (2, 0)]).unwrap();
        let mut c = cfg(&g, Mode::AvgDegree, 2);
        c.trigger = Trigger::Gt1;
        let run = run_trial(&g, &c, &mut ConstantRng::self_loop(), true);
        assert_eq!(run.result.outcome, Outcome::Deadlock);
        let rep = ground_truth_verify(&g, c.d_prime, &run.result, run.trace.as_ref());
        let v = rep.violations.iter().find(|v| v.kind == ViolationKind::Deadlock).unwrap();
        assert_eq!(v.detail, "no transmissions after round 0, not converged");
        assert!(!rep.has(ViolationKind::ResultMismatch), "{:?}", rep.violations);
    }

    #[test]
    fn tampered_send_is_found() {
        let g = Digraph::complete(4).unwrap();
        let c = cfg(&g, Mode::AvgDegree, 1);
        let run = run_trial(&g, &c, &mut trial_rng(3), true);
        let mut trace = run.trace.unwrap();
        let ev = trace
            .events_mut()
            .iter_mut()
            .find(|e| matches!(e.event, Event::Send { .. }) && e.round > 0)
            .unwrap();
        if let Event::Send { y, .. } = &mut ev.event {
            *y += 1;
        }
        let rep = ground_truth_verify(&g, c.d_prime, &run.result, Some(&trace));
        assert!(rep.has(ViolationKind::InconsistentTrace));
        assert!(rep.has(ViolationKind::MassNotConserved));
    }

    #[test]
    fn missing_self_send_is_found() {
        let g = Digraph::cycle(3).unwrap();
        let c = cfg(&g, Mode::SizeSeq, 2);
        let run = run_trial(&g, &c, &mut trial_rng(1), true);
        let mut trace = run.trace.unwrap();
        // a self-send keeps mass in place, so only the firing rule can catch it
        let at = trace
            .events()
            .iter()
            .position(|e| matches!(e.event, Event::Send { src, dst, .. } if src == dst))
            .expect("some token stays put");
        trace.events_mut().remove(at);
        let rep = ground_truth_verify(&g, c.d_prime, &run.result, Some(&trace));
        assert!(rep.has(ViolationKind::InconsistentTrace));
    }
}
