use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use bmatch_cli::{execute, run_suite, summarize, write_csv, Algorithm, BudgetSpec, GraphSource, RunConfig, Suite};
use bmatch_core::gen::{self, Fixture};
use bmatch_core::io::{write_budgets, write_edge_list};
use bmatch_core::mpc::MpcConfig;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bmatch", version, about = "Approximate maximum b-matching on a simulated MPC cluster")]
struct Cli {
    /// Worker threads for data-parallel loops; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated graph and budget vector.
    Generate {
        #[command(subcommand)]
        kind: Kind,
    },
    /// Run one algorithm and print a JSON report.
    Run {
        #[arg(value_enum)]
        algorithm: Algorithm,
        #[command(flatten)]
        args: RunArgs,
    },
    /// The streaming engine; same as `run stream`.
    Stream(RunArgs),
    /// Exact optimum and witness; same as `run oracle`.
    Oracle(RunArgs),
    /// Run a suite over a range of seeds and write one CSV row per seed.
    Bench(BenchArgs),
}

#[derive(Subcommand)]
enum Kind {
    Gnp {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        /// Draw integer weights in 1..=wmax; unweighted when absent.
        #[arg(long)]
        wmax: Option<u32>,
        #[command(flatten)]
        out: GenOut,
    },
    Bipartite {
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        n2: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        wmax: Option<u32>,
        #[command(flatten)]
        out: GenOut,
    },
    Path {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        out: GenOut,
    },
    Star {
        #[arg(long)]
        leaves: usize,
        #[command(flatten)]
        out: GenOut,
    },
    /// One of the named fixtures F1 (edge), F2 (triangle), F3 (path of four).
    Fixture {
        #[arg(value_parser = parse_fixture)]
        name: Fixture,
        #[command(flatten)]
        out: GenOut,
    },
}

#[derive(Args)]
struct GenOut {
    #[arg(long, env = "BMATCH_SEED", default_value_t = 0)]
    seed: u64,
    /// `constant:B`, `uniform:BMAX` or a budget file to copy.
    #[arg(long, default_value = "constant:1")]
    budgets: BudgetSpec,
    /// Edge-list output; stdout when absent.
    #[arg(long)]
    graph_out: Option<PathBuf>,
    /// Budget output; skipped when absent.
    #[arg(long)]
    budgets_out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Edge-list file, or fixture-F1 / fixture-F2 / fixture-F3.
    graph: GraphSource,
    /// Budget file, `constant:B` or `uniform:BMAX`.
    #[arg(long, default_value = "constant:1")]
    budgets: BudgetSpec,
    /// Run seed; falls back to the config file's `seed`, then 0.
    #[arg(long, env = "BMATCH_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// TOML file with cluster keys: machines, local_mem_factor, seed, sort_round_cost, ...
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    machines: Option<usize>,
    #[arg(long)]
    local_mem_factor: Option<f64>,
    #[arg(long)]
    sort_round_cost: Option<u64>,
    #[arg(long)]
    k_override: Option<usize>,
    #[arg(long)]
    phase_budget: Option<usize>,
    #[arg(long)]
    stall_limit: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    class_repetitions: Option<usize>,
    /// Exponent p of the weight windows `[eps^p q, (1 + eps^p) q]`.
    #[arg(long)]
    weight_window: Option<u32>,
    #[arg(long)]
    max_layers: Option<usize>,
    /// Constant c of the streaming memory budget.
    #[arg(long)]
    memory_constant: Option<f64>,
    /// Cap on grow-paths invocations per phase.
    #[arg(long)]
    max_invocations: Option<usize>,
    /// Compare against the exact optimum (only when m <= 24).
    #[arg(long)]
    with_oracle: bool,
    /// Leave wall time out of the report.
    #[arg(long)]
    omit_timing: bool,
    /// Report file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(value_enum)]
    suite: Suite,
    /// Number of seeds.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    start_seed: u64,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// CSV file; stdout when absent (the summary then goes to stderr).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_fixture(s: &str) -> Result<Fixture, String> {
    s.parse().map_err(|e: bmatch_core::Error| e.to_string())
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn generate(kind: Kind) -> Result<bool> {
    let (g, out) = match kind {
        Kind::Gnp { n, p, wmax, out } => (gen::gnp(n, p, wmax, out.seed)?, out),
        Kind::Bipartite { n1, n2, p, wmax, out } => (gen::bipartite(n1, n2, p, wmax, out.seed)?, out),
        Kind::Path { n, out } => (gen::path(n), out),
        Kind::Star { leaves, out } => (gen::star(leaves), out),
        Kind::Fixture { name, out } => (gen::fixture(name), out),
    };
    let b = out.budgets.load(g.n(), out.seed)?;
    let mut w = sink(&out.graph_out)?;
    write_edge_list(&g, &mut w)?;
    w.flush()?;
    if let Some(p) = &out.budgets_out {
        let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
        write_budgets(&b, &mut w)?;
        w.flush()?;
    }
    Ok(true)
}

fn run(algorithm: Algorithm, args: RunArgs) -> Result<bool> {
    let mut mpc = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<MpcConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => MpcConfig::default(),
    };
    let seed = args.seed.unwrap_or(if args.config.is_some() { mpc.seed } else { 0 });
    mpc.seed = seed;
    mpc.machines = args.machines.unwrap_or(mpc.machines);
    mpc.local_mem_factor = args.local_mem_factor.unwrap_or(mpc.local_mem_factor);
    mpc.sort_round_cost = args.sort_round_cost.unwrap_or(mpc.sort_round_cost);
    if algorithm == Algorithm::Weighted && args.eps < 0.3 {
        eprintln!("warning: eps = {} is below the recommended floor of 0.3 for the weighted engine", args.eps);
    }
    let cfg = RunConfig {
        algorithm,
        seed,
        eps: args.eps,
        mpc,
        k_override: args.k_override,
        phase_budget: args.phase_budget,
        stall_limit: args.stall_limit,
        repetitions: args.repetitions,
        class_repetitions: args.class_repetitions,
        weight_window: args.weight_window,
        max_layers: args.max_layers,
        memory_constant: args.memory_constant,
        max_invocations: args.max_invocations,
        with_oracle: args.with_oracle,
        omit_timing: args.omit_timing,
    };
    let g = args.graph.load()?;
    let b = args.budgets.load(g.n(), seed)?;
    let report = execute(&g, &b, &args.graph, &args.budgets, &cfg)?;
    let mut w = sink(&args.out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(report.checks_passed)
}

fn bench(args: BenchArgs) -> Result<bool> {
    let end = args.start_seed.checked_add(args.seeds).context("seed range overflows")?;
    let rows = run_suite(args.suite, args.start_seed..end, args.eps)?;
    let summary = serde_json::to_string_pretty(&summarize(args.suite, &rows))?;
    let mut w = sink(&args.out)?;
    write_csv(&rows, &mut w)?;
    w.flush()?;
    if args.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(rows.iter().all(|r| r.valid))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match cli.command {
        Command::Generate { kind } => generate(kind),
        Command::Run { algorithm, args } => run(algorithm, args),
        Command::Stream(args) => run(Algorithm::Stream, args),
        Command::Oracle(args) => run(Algorithm::Oracle, args),
        Command::Bench(args) => bench(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validity checks failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
