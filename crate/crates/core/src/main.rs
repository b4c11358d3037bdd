use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sixdma::error::{Error, Result};
use sixdma::harness::{self, ExperimentConfig};
use sixdma::pattern::PatternKind;
use sixdma::schemes::SchemeKind;

/// Worker-count override for the thread pool.
const WORKERS_ENV: &str = "SIXDMA_WORKERS";

#[derive(Parser)]
#[command(
    name = "sixdma",
    version,
    about = "Movable antenna surface placement for DoA sensing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize (or replay) one scheme for one pattern and seed over the power sweep.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scheme: SchemeKind,
        #[arg(long, value_parser = harness::config::parse_pattern)]
        pattern: PatternKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Evaluate this saved layout instead of optimizing.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Run every configured pattern, scheme and seed.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the configuration's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Redraw the CRB plot from a results directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io { .. } => Error::Config(e.to_string()),
        other => other,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize {
            config,
            scheme,
            pattern,
            seed,
            out,
            replay,
        } => {
            let cfg = load(&config)?;
            let records = match replay {
                Some(path) => harness::replay_layout(&cfg, pattern, scheme, seed, &path)?,
                None => harness::run_single(&cfg, pattern, scheme, seed)?,
            };
            harness::write_artifacts(&cfg, &records, &out)?;
            for r in records.iter().filter(|r| !r.feasible).take(1) {
                log::warn!("{} layout for seed {} violates placement constraints", r.scheme, r.seed);
            }
            log::info!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Sweep { config, out } => {
            let cfg = load(&config)?;
            let out = out.unwrap_or_else(|| PathBuf::from(&cfg.experiment.output_dir));
            let records = harness::run_experiment(&cfg)?;
            harness::write_artifacts(&cfg, &records, &out)?;
            log::info!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Plot { input, out } => {
            let rows = harness::read_csv(&input.join("results.csv"))?;
            harness::emit_plot(&rows, &out)?;
        }
    }
    Ok(())
}

fn init_workers() -> Result<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match init_workers().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::HashMismatch { .. } => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
