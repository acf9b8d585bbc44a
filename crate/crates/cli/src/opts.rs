use std::path::PathBuf;

use clap::Args;
use qcount_core::engine::{DPrime, GraphSource, Mode, SimConfig};
use qcount_core::graph::{read_edge_list, DEFAULT_RESAMPLE_CAP};
use qcount_core::{Digraph, Trigger, VoteSource};

use crate::Failure;

#[derive(Debug, Clone, Args)]
pub struct GraphOpts {
    /// Edge-list file ("n m" header, then 1-based "dst src" lines).
    #[arg(long, conflicts_with_all = ["n", "edge_prob", "diameter"])]
    pub graph: Option<PathBuf>,
    /// Nodes of each generated graph.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub edge_prob: f64,
    /// Keep only generated graphs with this diameter.
    #[arg(long)]
    pub diameter: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_RESAMPLE_CAP)]
    pub resample_cap: u32,
}

impl GraphOpts {
    pub fn source(&self) -> GraphSource {
        match &self.graph {
            Some(p) => GraphSource::File(p.clone()),
            None => GraphSource::Generated {
                n: self.n,
                edge_prob: self.edge_prob,
                diameter: self.diameter,
                resample_cap: self.resample_cap,
            },
        }
    }

    /// The file graph, if one was given.
    pub fn load(&self) -> Result<Option<Digraph>, Failure> {
        let Some(path) = &self.graph else { return Ok(None) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let g = read_edge_list(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        if !g.is_strongly_connected() {
            return Err(Failure::Graph(format!("{} is not strongly connected", path.display())));
        }
        Ok(Some(g))
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimOpts {
    #[arg(long, default_value_t = Mode::AvgDegree)]
    pub mode: Mode,
    /// Diameter bound D' (integer, or `diam` for each graph's exact diameter).
    #[arg(long, default_value = "4")]
    pub d_prime: DPrime,
    /// Election rounds U_v.
    #[arg(long, default_value_t = 20)]
    pub uv: u32,
    #[arg(long, default_value_t = 255)]
    pub eta_max: u64,
    #[arg(long, default_value_t = Trigger::Geq1)]
    pub trigger: Trigger,
    #[arg(long, default_value_t = VoteSource::Ratio)]
    pub vote: VoteSource,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Round budget (default 100 n D').
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Fixed leaders (1-based, comma separated); skips the election.
    #[arg(long, value_delimiter = ',')]
    pub leader: Option<Vec<usize>>,
}

impl SimOpts {
    pub fn sim_config(&self, graph: &GraphOpts, trials: u32) -> Result<SimConfig, Failure> {
        let assigned_leaders = match &self.leader {
            Some(list) => Some(
                list.iter()
                    .map(|&l| {
                        l.checked_sub(1)
                            .ok_or_else(|| Failure::Config("leader ids are 1-based".into()))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            None => None,
        };
        if assigned_leaders.is_some() && !matches!(self.mode, Mode::SizeSeq | Mode::SizeParOracle) {
            return Err(Failure::Config(format!("--leader needs size-seq or size-par-oracle, not {}", self.mode)));
        }
        Ok(SimConfig {
            graph: graph.source(),
            d_prime: self.d_prime,
            u_v: self.uv,
            eta_max: self.eta_max,
            eta_max_per_node: None,
            mode: self.mode,
            trigger: self.trigger,
            vote: self.vote,
            master_seed: self.seed,
            max_steps: self.max_steps,
            trials,
            assigned_leaders,
        })
    }
}
