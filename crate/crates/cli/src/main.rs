//! `spreaddetect`: locate the source and start of a change spreading over a
//! graph, test for its presence, and run the simulation benchmarks.

mod commands;
mod error;
mod io;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use error::CliError;

/// Version of every JSON document this tool writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "spreaddetect", version, args_override_self = true, about = "Source and change-point estimation for changes spreading over a network")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "SPREADDETECT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the source node and change time.
    Detect(DetectArgs),
    /// Test whether any spreading change is present.
    Test(TestArgs),
    /// Simulate one data matrix with a known source and change time.
    Simulate(SimulateArgs),
    /// Monte Carlo accuracy of the estimators for one or more configurations.
    Bench(BenchArgs),
    /// Deseasonalize weekly counts into a data matrix.
    Preprocess(PreprocessArgs),
    /// Brute-force identifiability count of a graph.
    Mg(MgArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StatArg {
    Quad,
    Linear,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Data CSV, one row per node and one column per time point.
    #[arg(long)]
    data: PathBuf,
    /// Graph spec: file:<path>, path:<p>, cycle:<p>, grid:<d>x<p1>[:open], tree:<p>, er:<p>:<prob>:<seed>.
    #[arg(long)]
    graph: String,
    #[arg(long, value_enum, default_value = "quad")]
    stat: StatArg,
    /// Search transmission rates, as start:stop:step or a comma list.
    #[arg(long)]
    rate_grid: Option<String>,
    /// Also write the full statistic matrix (rows = nodes, columns = t) here.
    #[arg(long)]
    emit_stat_matrix: Option<PathBuf>,
    /// Result JSON (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("level").required(true).args(["delta", "lambda"])))]
struct TestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    graph: String,
    /// Error probability; the threshold follows from p, n and delta.
    #[arg(long)]
    delta: Option<f64>,
    /// Explicit rejection threshold.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    graph: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    z_star: usize,
    #[arg(long)]
    j_star: usize,
    /// Size of the mean change at every node.
    #[arg(long, allow_hyphen_values = true)]
    signal: f64,
    /// det or stoch:<q>.
    #[arg(long, default_value = "det")]
    model: String,
    #[arg(long)]
    seed: u64,
    /// Replication index, selecting an independent stream of the seed.
    #[arg(long, default_value_t = 0)]
    rep: usize,
    /// Write the mean matrix without noise.
    #[arg(long)]
    noiseless: bool,
    /// Data CSV.
    #[arg(long, short)]
    output: PathBuf,
    /// Ground-truth JSON.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("rows").required(true).multiple(true).args(["table1_row", "table2_row"])))]
struct BenchArgs {
    /// "n,p,z_star,signal" with j_star = p/2 and deterministic spreading.
    #[arg(long)]
    table1_row: Vec<String>,
    /// "n,p,z_star,j_star,signal" under stochastic spreading.
    #[arg(long)]
    table2_row: Vec<String>,
    /// Graph family: path, cycle, tree, grid:<d>[:open], er:<prob>:<seed>.
    #[arg(long, default_value = "cycle")]
    family: String,
    /// Overrides the spreading model of every row (det or stoch:<q>).
    #[arg(long)]
    model: Option<String>,
    /// Transmission probability for table-2 rows without --model.
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Comma list from SD, rSD, SD-linear, coordwise.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long, default_value = "0.1:0.9:0.1")]
    rate_grid: String,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    /// Benchmark CSV (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    /// CSV with columns unit,date,count; dates are week-ending dates.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    graph: String,
    /// Unit of each graph node in node order: a comma list, or @<file> with one per line.
    #[arg(long)]
    units: String,
    /// Last week-ending date of the training window.
    #[arg(long)]
    train_end: NaiveDate,
    /// Kernel standard deviation in days.
    #[arg(long, default_value_t = spreaddetect::preprocess::DEFAULT_BANDWIDTH)]
    bandwidth: f64,
    /// Data matrix CSV.
    #[arg(long, short)]
    output: PathBuf,
    /// JSON with the fitted baselines.
    #[arg(long)]
    sidecar: PathBuf,
}

#[derive(Debug, Args)]
struct MgArgs {
    /// Graph spec; repeat for several graphs.
    #[arg(long, required = true)]
    graph: Vec<String>,
    #[arg(long, default_value_t = 0.25)]
    c1: f64,
    /// Horizon (default 4p).
    #[arg(long)]
    n: Option<usize>,
    /// Change time (default n/2).
    #[arg(long)]
    z_star: Option<usize>,
    /// Source node (default p/2, at least 1).
    #[arg(long, conflicts_with = "minimize_over_source")]
    j_star: Option<usize>,
    /// Take the minimum over every source node.
    #[arg(long)]
    minimize_over_source: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else {
        return Ok(());
    };
    if n == 0 {
        return Err(error::invalid("--threads", "must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(format!("cannot start thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Detect(a) => commands::detect(a),
        Command::Test(a) => commands::test(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Bench(a) => commands::bench(a),
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Mg(a) => commands::mg(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
