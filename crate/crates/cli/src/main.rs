//! `dyrc` — benchmark harness for visibility-graph reservoir computing.
//!
//! Subcommands cover the pipeline stages: `simulate` (oscillator
//! trajectories), `vg` (visibility graph of a series section), `metrics`
//! (network metrics of a graph file), `run` (the full benchmark sweep) and
//! `export` (regenerate summary/plot tables from results).
//!
//! Exit codes: 0 ok, 2 configuration error, 3 numerical divergence,
//! 4 data/file error. Log verbosity comes from the `DYRC_LOG` environment
//! variable (error, warn, info, debug).

mod cmds;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "dyrc",
    version,
    about = "Reservoir-computing benchmark: visibility-graph reservoirs vs random baselines on Duffing prediction"
)]
struct Cli {
    /// Master seed (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for the sweep (0 = all cores)
    #[arg(long, global = true)]
    parallel: Option<usize>,

    /// Config file: TOML, or JSON with a .json extension
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a Duffing trajectory and write it as CSV plus a JSON sidecar
    Simulate(SimulateArgs),
    /// Build the visibility graph of a series section and write edge list + metrics
    Vg(VgArgs),
    /// Print the six network metrics of a graph file
    Metrics(MetricsArgs),
    /// Run the benchmark sweep and write results, summary and plot data
    Run(RunArgs),
    /// Regenerate summary and plot data from an existing results.csv
    Export(ExportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in parameter set (1, 2 or 3)
    #[arg(long, default_value_t = 1)]
    set: u8,

    /// Parameter override, repeatable: d=…, k=…, k_nl=…, F=…, Omega=…
    #[arg(long, value_name = "KEY=VALUE")]
    force: Vec<String>,

    /// Initial condition as "q0,v0" (default 1,0)
    #[arg(long)]
    ic: Option<String>,

    /// Recorded samples before transient removal
    #[arg(long)]
    samples: Option<usize>,

    /// Leading recorded samples dropped as transient
    #[arg(long)]
    transient: Option<usize>,

    /// Integrator substeps per recorded sample
    #[arg(long)]
    substeps: Option<u32>,

    /// Recording time step (default: forcing period / 100)
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct VgArgs {
    /// Input series CSV with header t,q,qdot,g
    #[arg(long)]
    input: PathBuf,

    /// Points per section (= reservoir size N)
    #[arg(long)]
    points: usize,

    /// Take every stride-th sample (1 or 16 in the benchmark)
    #[arg(long, default_value_t = 1)]
    stride: usize,

    /// Which of the sections to use
    #[arg(long, default_value_t = 0)]
    section_index: usize,

    /// How many sections the series is divided into
    #[arg(long, default_value_t = 100)]
    sections: usize,
}

#[derive(Args)]
struct MetricsArgs {
    /// Graph edge-list CSV (as written by `dyrc vg`)
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args, Default)]
struct RunArgs {
    /// Duffing parameter set (1, 2 or 3)
    #[arg(long)]
    set: Option<u8>,

    /// Reservoir sizes, comma separated
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,

    /// Replicates per (variant, size) cell
    #[arg(long)]
    replicates: Option<usize>,

    /// Variants, comma separated: ER, DenseER, DyRC_VG, DyRC_VG_16
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,

    /// Prediction mode: open or closed
    #[arg(long)]
    mode: Option<String>,

    /// Section placement: evenly or random
    #[arg(long)]
    sections: Option<String>,

    /// Train fraction in (0, 1)
    #[arg(long)]
    train_fraction: Option<f64>,

    /// Export measured wall times (breaks byte-reproducibility of results.csv)
    #[arg(long)]
    timing: bool,

    /// Series cache file: read when present, written after simulation otherwise
    #[arg(long)]
    dataset_cache: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Existing results.csv
    #[arg(long)]
    results: PathBuf,
}

/// A failure with its process exit code.
pub(crate) struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub(crate) fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub(crate) fn divergence(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    pub(crate) fn data(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DYRC_LOG", "info"))
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();
    let common = cmds::Common {
        seed: cli.seed,
        out: cli.out,
        parallel: cli.parallel,
        config: cli.config,
    };
    let result = match cli.command {
        Command::Simulate(args) => cmds::simulate(&common, &args),
        Command::Vg(args) => cmds::vg(&common, &args),
        Command::Metrics(args) => cmds::metrics_cmd(&args),
        Command::Run(args) => cmds::run(&common, &args),
        Command::Export(args) => cmds::export(&common, &args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
