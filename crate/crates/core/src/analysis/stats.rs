use serde::Serialize;

use crate::engine::{ElectionRecord, Mode, TrialResult};

pub const DEFAULT_BIN_WIDTH: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("no trials to aggregate")]
    Empty,
    #[error("histogram bin width must be positive")]
    ZeroBinWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HistBin {
    /// Inclusive lower edge.
    pub start: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialStats {
    /// Trials that finished (halted, or converged for leaderless runs).
    pub count: usize,
    pub mean: Option<f64>,
    pub min: Option<u64>,
    pub max: Option<u64>,
    pub bin_width: u64,
    pub histogram: Vec<HistBin>,
    pub multi_leader: usize,
    pub unfinished: usize,
    pub incorrect: usize,
}

fn histogram(values: &[u64], width: u64) -> Vec<HistBin> {
    let (Some(&lo), Some(&hi)) = (values.iter().min(), values.iter().max()) else {
        return Vec::new();
    };
    let first = lo / width;
    let mut bins: Vec<HistBin> = (first..=hi / width)
        .map(|b| HistBin { start: b * width, count: 0 })
        .collect();
    for &v in values {
        bins[(v / width - first) as usize].count += 1;
    }
    bins
}

/// Summary of step counts.
pub fn summarize_steps(values: &[u64], bin_width: u64) -> Result<TrialStats, StatsError> {
    if bin_width == 0 {
        return Err(StatsError::ZeroBinWidth);
    }
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    let sum: u128 = values.iter().map(|&v| u128::from(v)).sum();
    Ok(TrialStats {
        count: values.len(),
        mean: Some(sum as f64 / values.len() as f64),
        min: values.iter().min().copied(),
        max: values.iter().max().copied(),
        bin_width,
        histogram: histogram(values, bin_width),
        multi_leader: 0,
        unfinished: 0,
        incorrect: 0,
    })
}

pub fn aggregate_trials<'a, I>(results: I, bin_width: u64) -> Result<TrialStats, StatsError>
where
    I: IntoIterator<Item = &'a TrialResult>,
{
    if bin_width == 0 {
        return Err(StatsError::ZeroBinWidth);
    }
    let mut steps = Vec::new();
    let (mut total, mut multi, mut unfinished, mut incorrect) = (0, 0, 0, 0);
    for r in results {
        total += 1;
        match r.steps() {
            Some(s) => steps.push(s),
            None => unfinished += 1,
        }
        if matches!(r.mode, Mode::SizeSeq | Mode::SizeParOracle | Mode::SizeParCorrection) && r.leader_count > 1 {
            multi += 1;
        }
        incorrect += usize::from(!r.correct);
    }
    if total == 0 {
        return Err(StatsError::Empty);
    }
    let mut stats = match summarize_steps(&steps, bin_width) {
        Ok(s) => s,
        Err(_) => TrialStats {
            count: 0,
            mean: None,
            min: None,
            max: None,
            bin_width,
            histogram: Vec::new(),
            multi_leader: 0,
            unfinished: 0,
            incorrect: 0,
        },
    };
    stats.multi_leader = multi;
    stats.unfinished = unfinished;
    stats.incorrect = incorrect;
    Ok(stats)
}

/// Smallest sample `v` with empirical CDF `F(v) >= p`.
pub fn quantile(values: &[u64], p: f64) -> Option<u64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElectionStats {
    pub trials: usize,
    /// Trials still with more than one leader after all rounds.
    pub multi_leader: usize,
    /// Trials with more than one leader after each election round.
    pub multi_leader_per_round: Vec<usize>,
    pub mean_leaders: f64,
}

pub fn aggregate_elections(records: &[ElectionRecord]) -> Result<ElectionStats, StatsError> {
    if records.is_empty() {
        return Err(StatsError::Empty);
    }
    let rounds = records.iter().map(|r| r.outcome.leaders_per_round.len()).max().unwrap_or(0);
    let mut per_round = vec![0; rounds];
    for r in records {
        for (i, &c) in r.outcome.leaders_per_round.iter().enumerate() {
            per_round[i] += usize::from(c > 1);
        }
    }
    let leaders: usize = records.iter().map(|r| r.outcome.leader_count).sum();
    Ok(ElectionStats {
        trials: records.len(),
        multi_leader: records.iter().filter(|r| r.outcome.leader_count > 1).count(),
        multi_leader_per_round: per_round,
        mean_leaders: leaders as f64 / records.len() as f64,
    })
}
