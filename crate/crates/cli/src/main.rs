mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shrinkport_core::dea::Group;

use config::{parse_dataset, DatasetSpec, RunConfig};
use error::CliError;

/// Shrinkage-estimator portfolio backtests ranked by DEA super-efficiency.
#[derive(Debug, Parser)]
#[command(name = "shrinkport", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Price CSV as NAME=PATH (or a directory of CSVs). Repeatable.
    #[arg(long = "dataset", global = true, value_parser = parse_dataset)]
    datasets: Vec<DatasetSpec>,

    /// DEA groups to rank, e.g. `A,C`.
    #[arg(long, global = true, value_delimiter = ',')]
    groups: Vec<Group>,

    /// Out-of-sample lengths in days, e.g. `65,130,260`.
    #[arg(long, global = true, value_delimiter = ',')]
    oos: Vec<usize>,

    /// Seed for synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate price files and write returns plus a manifest.
    Ingest {
        #[arg(long)]
        insample: Option<usize>,
    },
    /// Generate a synthetic price CSV from a factor model.
    Synth {
        #[arg(long)]
        assets: Option<usize>,
        #[arg(long)]
        obs: Option<usize>,
        #[arg(long)]
        factors: Option<usize>,
        /// File name (without extension) inside the output directory.
        #[arg(long, default_value = "synthetic")]
        name: String,
    },
    /// Run the model grid, rank, select and compare.
    Backtest {
        #[arg(long)]
        insample: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Re-rank the stored metrics of a previous backtest.
    Rank {
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Rebuild the benchmark comparison table from stored metrics.
    Compare {
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Write and print a Markdown summary of stored metrics.
    Report {
        #[arg(long)]
        top_k: Option<usize>,
    },
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if !cli.datasets.is_empty() {
        cfg.datasets = cli.datasets.clone();
    }
    if !cli.groups.is_empty() {
        cfg.groups = cli.groups.clone();
        cfg.groups.sort();
        cfg.groups.dedup();
    }
    if !cli.oos.is_empty() {
        cfg.outsample = cli.oos.clone();
    }
    if let Some(s) = cli.seed {
        cfg.synth.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    match &cli.command {
        Command::Ingest { insample } => {
            if let Some(i) = insample {
                cfg.insample_len = *i;
            }
        }
        Command::Synth {
            assets,
            obs,
            factors,
            ..
        } => {
            if let Some(a) = assets {
                cfg.synth.n_assets = *a;
            }
            if let Some(n) = obs {
                cfg.synth.n_obs = *n;
            }
            if let Some(k) = factors {
                cfg.synth.n_factors = *k;
            }
        }
        Command::Backtest { insample, top_k } => {
            if let Some(i) = insample {
                cfg.insample_len = *i;
            }
            if let Some(k) = top_k {
                cfg.top_k = *k;
            }
        }
        Command::Rank { top_k } | Command::Compare { top_k } | Command::Report { top_k } => {
            if let Some(k) = top_k {
                cfg.top_k = *k;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn list(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Ingest { .. } => list(&commands::ingest(&cfg)?),
        Command::Synth { name, .. } => {
            let (path, hash) = commands::synth(&cfg, name)?;
            println!("wrote {} (sha256 {hash})", path.display());
        }
        Command::Backtest { .. } => list(&commands::backtest(&cfg)?),
        Command::Rank { .. } => list(&commands::rank(&cfg)?),
        Command::Compare { .. } => list(&commands::compare(&cfg)?),
        Command::Report { .. } => {
            let (path, text) = commands::report(&cfg)?;
            print!("{text}");
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation errors; keep 2 for numerical failures
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
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
