use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::graph::{Digraph, DEFAULT_RESAMPLE_CAP};
use crate::protocol::{str_enum, Trigger, VoteSource};

use std::fmt;
use std::str::FromStr;

/// Which protocol a trial runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Average degree with distributed stopping.
    #[default]
    AvgDegree,
    /// Leader election, then the size iteration.
    SizeSeq,
    /// Election and size iteration on the same rounds; the size iteration is
    /// seeded with the eventual winner. Total time `max(U_v D', size halt)`.
    SizeParOracle,
    /// Every node starts as a provisional leader with `(1, 1)`; demoted nodes
    /// inject `(-1, 0)` correction tokens.
    SizeParCorrection,
    /// No leader and no stopping; stops when every `z^s` equals `n`.
    SizeAnonymous,
}

str_enum!(Mode {
    AvgDegree => "avg-degree",
    SizeSeq => "size-seq",
    SizeParOracle => "size-par-oracle",
    SizeParCorrection => "size-par-correction",
    SizeAnonymous => "size-anonymous",
});

impl Mode {
    pub fn runs_election(self) -> bool {
        matches!(
            self,
            Mode::SizeSeq | Mode::SizeParOracle | Mode::SizeParCorrection
        )
    }

    pub fn is_size(self) -> bool {
        self != Mode::AvgDegree
    }
}

/// Diameter bound known to every node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DPrime {
    Fixed(u64),
    /// Use the exact diameter of each graph.
    Diameter,
}

impl FromStr for DPrime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "diam" | "diameter" => Ok(DPrime::Diameter),
            _ => s
                .parse()
                .map(DPrime::Fixed)
                .map_err(|_| format!("expected a positive integer or `diam`, got {s:?}")),
        }
    }
}

impl fmt::Display for DPrime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DPrime::Fixed(v) => write!(f, "{v}"),
            DPrime::Diameter => f.write_str("diam"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GraphSource {
    Generated {
        n: usize,
        edge_prob: f64,
        /// Redraw until the diameter equals this value.
        diameter: Option<u32>,
        resample_cap: u32,
    },
    File(PathBuf),
}

impl Default for GraphSource {
    fn default() -> Self {
        GraphSource::Generated {
            n: 20,
            edge_prob: 0.5,
            diameter: None,
            resample_cap: DEFAULT_RESAMPLE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub graph: GraphSource,
    pub d_prime: DPrime,
    pub u_v: u32,
    pub eta_max: u64,
    /// Per-node `eta_max`, overriding `eta_max` when present.
    pub eta_max_per_node: Option<Vec<u64>>,
    pub mode: Mode,
    pub trigger: Trigger,
    pub vote: VoteSource,
    pub master_seed: u64,
    /// Defaults to `100 * n * D'`.
    pub max_steps: Option<u64>,
    pub trials: u32,
    /// Pre-assigned leaders; skips the election in leader-based size modes.
    pub assigned_leaders: Option<Vec<usize>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            graph: GraphSource::default(),
            d_prime: DPrime::Fixed(4),
            u_v: 20,
            eta_max: 255,
            eta_max_per_node: None,
            mode: Mode::AvgDegree,
            trigger: Trigger::Geq1,
            vote: VoteSource::Ratio,
            master_seed: 0,
            max_steps: None,
            trials: 1,
            assigned_leaders: None,
        }
    }
}

/// A [`SimConfig`] bound to a concrete graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub n: usize,
    pub diameter: u32,
    pub d_prime: u64,
    pub u_v: u32,
    pub eta_max: Vec<u64>,
    pub trigger: Trigger,
    pub vote: VoteSource,
    pub max_steps: u64,
    pub assigned_leaders: Option<Vec<usize>>,
    /// Non-fatal problems, e.g. `D' < D`.
    pub warnings: Vec<String>,
}

impl RunConfig {
    /// Rounds spent in the election: `U_v * D'`.
    pub fn election_rounds(&self) -> u64 {
        u64::from(self.u_v) * self.d_prime
    }

    /// Whether this run performs an election (leader-based mode without assigned leaders).
    pub fn elects(&self) -> bool {
        match self.mode {
            Mode::SizeSeq | Mode::SizeParOracle => self.assigned_leaders.is_none(),
            Mode::SizeParCorrection => true,
            _ => false,
        }
    }
}

impl SimConfig {
    /// Validates against `g` and fills in graph-dependent defaults.
    pub fn resolve(&self, g: &Digraph) -> Result<RunConfig, ConfigError> {
        let n = g.node_count();
        let diameter = g.diameter()?;
        let d_prime = match self.d_prime {
            DPrime::Fixed(0) => return Err(invalid("d_prime must be positive")),
            DPrime::Fixed(v) => v,
            DPrime::Diameter => u64::from(diameter),
        };
        if self.u_v == 0 {
            return Err(invalid("u_v must be positive"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be positive"));
        }
        let eta_max = match &self.eta_max_per_node {
            Some(v) if v.len() != n => {
                return Err(invalid(format!(
                    "eta_max_per_node has {} entries for {n} nodes",
                    v.len()
                )))
            }
            Some(v) => v.clone(),
            None => vec![self.eta_max; n],
        };
        if let Some(&bad) = eta_max.iter().find(|&&e| e < 1) {
            return Err(invalid(format!("eta_max must be at least 1, got {bad}")));
        }
        let max_steps = self.max_steps.unwrap_or(100 * n as u64 * d_prime);
        let election_rounds = u64::from(self.u_v) * d_prime;
        if max_steps <= election_rounds {
            return Err(invalid(format!(
                "max_steps ({max_steps}) must exceed U_v * D' ({election_rounds})"
            )));
        }
        if let Some(leaders) = &self.assigned_leaders {
            if leaders.is_empty() {
                return Err(invalid("assigned leader list is empty"));
            }
            if let Some(&bad) = leaders.iter().find(|&&l| l >= n) {
                return Err(invalid(format!("assigned leader {bad} out of range")));
            }
        }
        let mut warnings = Vec::new();
        if d_prime < u64::from(diameter) {
            warnings.push(format!(
                "D' = {d_prime} is below the diameter D = {diameter}; stopping may be premature"
            ));
        }
        Ok(RunConfig {
            mode: self.mode,
            n,
            diameter,
            d_prime,
            u_v: self.u_v,
            eta_max,
            trigger: self.trigger,
            vote: self.vote,
            max_steps,
            assigned_leaders: self.assigned_leaders.clone(),
            warnings,
        })
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}
