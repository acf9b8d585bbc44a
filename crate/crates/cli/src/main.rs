//! `qcount`: graph generation, single runs, sweeps, bounds and trace checks.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qcount_core::analysis::{
    aggregate_elections, aggregate_trials, lemma1_bound, lemma2_bound, leader_success_lower_bound, ratio_to_f64,
    theorem2_k0, BoundInputs, DEFAULT_BIN_WIDTH,
};
use qcount_core::engine::{
    draw_trial_graph, ground_truth_verify, replay, run_election_sweep, run_sweep, run_trial, Outcome, RoundTrace,
    TrialResult, VerifyReport,
};
use qcount_core::graph::write_edge_list;
use qcount_core::rng::{mix_seed, trial_rng, ConstantRng};
use qcount_core::{ConfigError, Digraph, GraphError};

mod opts;

use opts::{GraphOpts, SimOpts};

#[derive(Debug)]
pub enum Failure {
    Io(String),
    Config(String),
    Graph(String),
    Stopped(String),
    Verify(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Graph(_) => 3,
            Failure::Stopped(_) => 4,
            Failure::Verify(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Config(m) | Failure::Graph(m) | Failure::Stopped(m) | Failure::Verify(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Graph(g @ (GraphError::NotStronglyConnected | GraphError::ResampleCapExceeded { .. })) => {
                Failure::Graph(g.to_string())
            }
            other => Failure::Config(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(name = "qcount", version, about = "Quantized average-degree and network-size experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a strongly connected random digraph and write it as an edge list.
    GenGraph(GenGraphArgs),
    /// Run one trial with a full trace and ground-truth verification.
    Run(RunArgs),
    /// Run many independent trials and summarize them.
    Sweep(SweepArgs),
    /// Evaluate the convergence and election bounds.
    Bounds(BoundsArgs),
    /// Replay a trace and check it against ground truth.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenGraphArgs {
    #[command(flatten)]
    graph: GraphOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RngChoice {
    Seeded,
    /// Every draw returns the largest value, so every token picks itself.
    StubSelfloop,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    graph: GraphOpts,
    #[command(flatten)]
    sim: SimOpts,
    #[arg(long, value_enum, default_value_t = RngChoice::Seeded)]
    rng: RngChoice,
    /// One-row CSV result (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Line-delimited JSON event log.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Per-round per-node `(y^s, z^s)` as CSV.
    #[arg(long)]
    state_dump: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    graph: GraphOpts,
    #[command(flatten)]
    sim: SimOpts,
    #[arg(long, default_value_t = 100)]
    trials: u32,
    /// Per-trial CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary statistics as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    bin_width: u64,
    /// Exit 0 even when some trial is incorrect.
    #[arg(long)]
    allow_failures: bool,
    /// Run only the leader election.
    #[arg(long)]
    election_only: bool,
}

#[derive(Args)]
struct BoundsArgs {
    /// Take n, D+max and D from this edge list.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Largest out-degree D+max.
    #[arg(long)]
    dmax: Option<usize>,
    #[arg(long)]
    diam: Option<u32>,
    /// Defaults to the diameter.
    #[arg(long)]
    d_prime: Option<u64>,
    #[arg(long, default_value_t = 0.81)]
    p0: f64,
    /// Election rounds; the leader bound is printed only when given.
    #[arg(long)]
    uv: Option<u32>,
    /// Draw levels M = eta_max + 1.
    #[arg(long, default_value_t = 256)]
    levels: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    trace: PathBuf,
}

#[derive(Serialize)]
struct TrialRow<'a> {
    trial: u32,
    seed: u64,
    n: usize,
    m_edges: usize,
    #[serde(rename = "D")]
    diameter: u32,
    d_prime: u64,
    mode: &'a str,
    steps_converged: Option<u64>,
    steps_halted: Option<u64>,
    correct: bool,
    leader_count: usize,
    deadlocked: bool,
}

fn trial_row(trial: u32, seed: u64, g: &Digraph, diameter: u32, d_prime: u64, r: &TrialResult) -> TrialRow<'static> {
    TrialRow {
        trial,
        seed,
        n: g.node_count(),
        m_edges: g.edge_count(),
        diameter,
        d_prime,
        mode: r.mode.as_str(),
        steps_converged: r.steps_converged,
        steps_halted: r.steps_halted,
        correct: r.correct,
        leader_count: r.leader_count,
        deadlocked: r.deadlocked,
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p).map_err(io_err(p))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, Failure> {
    Ok(csv::Writer::from_writer(output(path)?))
}

fn csv_err(e: csv::Error) -> Failure {
    Failure::Io(e.to_string())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn print_violations(report: &VerifyReport) {
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
}

fn cmd_gen_graph(args: GenGraphArgs) -> Result<(), Failure> {
    if args.graph.graph.is_some() {
        return Err(Failure::Config("gen-graph draws a graph; --graph is not accepted".into()));
    }
    let seed = mix_seed(args.seed, 0);
    let tg = draw_trial_graph(&args.graph.source(), None, &mut trial_rng(seed))?;
    let g = &tg.graph;
    eprintln!(
        "n={} m={} D={} dmax={} resamples={} diameter_rejections={} seed={}",
        g.node_count(),
        g.edge_count(),
        g.diameter().map_err(ConfigError::from)?,
        g.max_out_degree(),
        tg.resamples,
        tg.diameter_rejections,
        seed
    );
    let mut out = output(args.out.as_deref())?;
    out.write_all(write_edge_list(g).as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Io(e.to_string()))
}

#[derive(Serialize)]
struct EffectiveRun<'a> {
    master_seed: u64,
    trial_seed: u64,
    rng: &'a str,
    m_edges: usize,
    resamples: u32,
    diameter_rejections: u32,
    config: &'a qcount_core::engine::RunConfig,
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let sim = args.sim.sim_config(&args.graph, 1)?;
    let fixed = args.graph.load()?;
    let seed = mix_seed(sim.master_seed, 0);
    let mut rng = trial_rng(seed);
    let tg = draw_trial_graph(&sim.graph, fixed.as_ref(), &mut rng)?;
    let g = &tg.graph;
    let cfg = sim.resolve(g)?;
    let effective = EffectiveRun {
        master_seed: sim.master_seed,
        trial_seed: seed,
        rng: match args.rng {
            RngChoice::Seeded => "seeded",
            RngChoice::StubSelfloop => "stub-selfloop",
        },
        m_edges: g.edge_count(),
        resamples: tg.resamples,
        diameter_rejections: tg.diameter_rejections,
        config: &cfg,
    };
    eprintln!("config: {}", serde_json::to_string(&effective).expect("config serializes"));
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }

    let run = match args.rng {
        RngChoice::Seeded => run_trial(g, &cfg, &mut rng, true),
        RngChoice::StubSelfloop => run_trial(g, &cfg, &mut ConstantRng::self_loop(), true),
    };
    let trace = run.trace.expect("trace requested");
    let result = run.result;
    let report = ground_truth_verify(g, cfg.d_prime, &result, Some(&trace));

    if let Some(p) = &args.trace {
        fs::write(p, trace.to_jsonl()).map_err(io_err(p))?;
    }
    if let Some(p) = &args.state_dump {
        let rep = replay(g, &trace).map_err(|e| Failure::Verify(e.to_string()))?;
        let mut w = csv_writer(Some(p))?;
        w.write_record(["round", "node", "y", "z"]).map_err(csv_err)?;
        for (round, states) in &rep.state_history {
            for (node, (y, z)) in states.iter().enumerate() {
                w.write_record([round.to_string(), node.to_string(), y.to_string(), z.to_string()])
                    .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Failure::Io(e.to_string()))?;
    }
    let mut w = csv_writer(args.out.as_deref())?;
    w.serialize(trial_row(0, seed, g, cfg.diameter, cfg.d_prime, &result)).map_err(csv_err)?;
    w.flush().map_err(|e| Failure::Io(e.to_string()))?;

    print_violations(&report);
    match result.outcome {
        Outcome::Deadlock => Err(Failure::Stopped(format!(
            "deadlock: no transmissions after round {}, not converged",
            result.last_send_round
        ))),
        Outcome::MaxSteps => Err(Failure::Stopped(format!("no stop within {} rounds", cfg.max_steps))),
        _ if !report.is_clean() || !result.correct => {
            Err(Failure::Verify(format!("{} verification finding(s)", report.violations.len())))
        }
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct SweepSummary<T: Serialize> {
    trials: u32,
    master_seed: u64,
    diameter_filter: Option<u32>,
    diameter_rejections: u64,
    resamples: u64,
    stats: T,
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let sim = args.sim.sim_config(&args.graph, args.trials)?;
    let fixed = args.graph.load()?;
    let filter = args.graph.graph.is_none().then_some(args.graph.diameter).flatten();
    if args.election_only {
        let recs = run_election_sweep(&sim, fixed.as_ref())?;
        let mut w = csv_writer(args.out.as_deref())?;
        w.write_record(["trial", "seed", "n", "D", "d_prime", "leader_count", "leaders_per_round"])
            .map_err(csv_err)?;
        for r in &recs {
            let per_round: Vec<String> = r.outcome.leaders_per_round.iter().map(ToString::to_string).collect();
            w.write_record([
                r.trial.to_string(),
                r.seed.to_string(),
                r.n.to_string(),
                r.diameter.to_string(),
                r.d_prime.to_string(),
                r.outcome.leader_count.to_string(),
                per_round.join(";"),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Failure::Io(e.to_string()))?;
        let stats = aggregate_elections(&recs).map_err(|e| Failure::Config(e.to_string()))?;
        eprintln!("trials={} multi_leader={} mean_leaders={:.4}", stats.trials, stats.multi_leader, stats.mean_leaders);
        if let Some(p) = &args.stats {
            write_json(
                p,
                &SweepSummary {
                    trials: args.trials,
                    master_seed: sim.master_seed,
                    diameter_filter: filter,
                    diameter_rejections: 0,
                    resamples: 0,
                    stats,
                },
            )?;
        }
        return Ok(());
    }

    let recs = run_sweep(&sim, fixed.as_ref())?;
    let mut w = csv_writer(args.out.as_deref())?;
    for r in &recs {
        w.serialize(TrialRow {
            trial: r.trial,
            seed: r.seed,
            n: r.n,
            m_edges: r.m_edges,
            diameter: r.diameter,
            d_prime: r.d_prime,
            mode: r.result.mode.as_str(),
            steps_converged: r.result.steps_converged,
            steps_halted: r.result.steps_halted,
            correct: r.result.correct,
            leader_count: r.result.leader_count,
            deadlocked: r.result.deadlocked,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Failure::Io(e.to_string()))?;
    let stats = aggregate_trials(recs.iter().map(|r| &r.result), args.bin_width)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let summary = SweepSummary {
        trials: args.trials,
        master_seed: sim.master_seed,
        diameter_filter: filter,
        diameter_rejections: recs.iter().map(|r| u64::from(r.diameter_rejections)).sum(),
        resamples: recs.iter().map(|r| u64::from(r.resamples)).sum(),
        stats,
    };
    eprintln!(
        "trials={} finished={} mean={} min={:?} max={:?} incorrect={} multi_leader={} diameter_rejections={}",
        args.trials,
        summary.stats.count,
        summary.stats.mean.map_or("-".to_string(), |m| format!("{m:.2}")),
        summary.stats.min,
        summary.stats.max,
        summary.stats.incorrect,
        summary.stats.multi_leader,
        summary.diameter_rejections
    );
    if let Some(p) = &args.stats {
        write_json(p, &summary)?;
    }
    if summary.stats.incorrect > 0 && !args.allow_failures {
        let stuck = recs.iter().any(|r| matches!(r.result.outcome, Outcome::Deadlock | Outcome::MaxSteps));
        let msg = format!("{} incorrect trial(s); pass --allow-failures to accept", summary.stats.incorrect);
        return Err(if stuck { Failure::Stopped(msg) } else { Failure::Verify(msg) });
    }
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), Failure> {
    let from_graph = match &args.graph {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            let g = qcount_core::graph::read_edge_list(&text).map_err(|e| Failure::Config(e.to_string()))?;
            let diam = g.diameter().map_err(ConfigError::from)?;
            Some((g.node_count(), g.max_out_degree(), diam))
        }
        None => None,
    };
    let n = args.n.or(from_graph.map(|g| g.0));
    let dmax = args.dmax.or(from_graph.map(|g| g.1));
    let diam = args.diam.or(from_graph.map(|g| g.2));
    let Some(n) = n else {
        return Err(Failure::Config("--n (or --graph) is required".into()));
    };
    let mut inapplicable = Vec::new();
    println!("inputs: n={n} dmax={} diam={} p0={} uv={} levels={}",
        dmax.map_or("-".into(), |v| v.to_string()),
        diam.map_or("-".into(), |v| v.to_string()),
        args.p0,
        args.uv.map_or("-".into(), |v| v.to_string()),
        args.levels);
    if let (Some(dmax), Some(diam)) = (dmax, diam) {
        let inputs = BoundInputs {
            n,
            d_max_out: dmax,
            diam,
            d_prime: args.d_prime.unwrap_or(u64::from(diam)),
            p0: args.p0,
            u_v: args.uv.unwrap_or(1),
            m_levels: args.levels,
        };
        inputs.validate().map_err(|e| Failure::Config(e.to_string()))?;
        let l1 = lemma1_bound(&inputs);
        println!("lemma1: exact={l1} decimal={:.12e}", ratio_to_f64(&l1));
        let l2 = lemma2_bound(&inputs);
        print!("lemma2: exact={} decimal={:.12e}", l2.exact, l2.to_f64());
        if l2.vacuous {
            print!(" vacuous (reported as {})", l2.clamped());
        }
        println!();
        match theorem2_k0(&inputs) {
            Ok(k) => {
                println!("epsilon_prime: decimal={:.12e}", k.epsilon_prime);
                println!("tau_prime: {}", k.tau_prime);
                println!("epsilon_dprime: decimal={:.12e}", k.epsilon_dprime);
                println!("tau_dprime: {}", k.tau_dprime);
                println!("k0: {}", k.k0);
            }
            Err(e) => {
                println!("k0: {e}");
                inapplicable.push(format!("k0: {e}"));
            }
        }
    } else if dmax.is_some() || diam.is_some() {
        return Err(Failure::Config("--dmax and --diam go together".into()));
    }
    if let Some(uv) = args.uv {
        match leader_success_lower_bound(uv, n, args.levels) {
            Ok(b) => {
                print!("leader: exact={} decimal={:.12e}", b.exact, b.to_f64());
                if b.vacuous {
                    print!(" vacuous (reported as {})", b.clamped());
                }
                println!();
            }
            Err(e) => {
                println!("leader: {e}");
                inapplicable.push(format!("leader: {e}"));
            }
        }
    }
    if inapplicable.is_empty() {
        Ok(())
    } else {
        Err(Failure::Config(inapplicable.join("; ")))
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.graph).map_err(io_err(&args.graph))?;
    let g = qcount_core::graph::read_edge_list(&text).map_err(|e| Failure::Config(e.to_string()))?;
    if !g.is_strongly_connected() {
        return Err(Failure::Graph("graph is not strongly connected".into()));
    }
    let text = fs::read_to_string(&args.trace).map_err(io_err(&args.trace))?;
    let trace = RoundTrace::from_jsonl(&text).map_err(|e| Failure::Config(format!("trace: {e}")))?;
    let rep = replay(&g, &trace).map_err(|e| Failure::Verify(e.to_string()))?;
    let report = ground_truth_verify(&g, rep.d_prime, &rep.result, Some(&trace));
    println!("{}", serde_json::to_string(&rep.result).expect("result serializes"));
    print_violations(&report);
    if report.is_clean() {
        println!("ok");
        Ok(())
    } else {
        Err(Failure::Verify(format!("{} violation(s)", report.violations.len())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::GenGraph(a) => cmd_gen_graph(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
