use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use cdimc::config::{parse_list, RunConfig};
use cdimc::error::{CliError, Result};
use cdimc::run::{cmd_eval, cmd_mask, cmd_run, cmd_synth};
use cdimc_core::dataset::{MaskMode, MaskSpec, SyntheticSpec};
use clap::{Parser, Subcommand, ValueEnum};

/// Incomplete multi-view clustering.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    PerView,
    Paired,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a dataset for one or more seeds and write a report.
    Run {
        /// Flat `key = value` config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seeds, e.g. `0,1,2` or `0..5`.
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dataset directory (shorthand for `--set data=<dir>`).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Override one config key; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Remove views from a complete dataset.
    Mask {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        rate: f64,
        #[arg(long, value_enum, default_value = "per-view")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted clusters against true labels.
    Eval {
        /// Predictions: `index,cluster` rows or one cluster per line.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Write a synthetic multi-view dataset with labels.
    Synth {
        #[arg(long, default_value_t = 3)]
        clusters: usize,
        #[arg(long, default_value_t = 300)]
        n: usize,
        /// Features per view, comma-separated.
        #[arg(long, default_value = "10,10")]
        dims: String,
        #[arg(long, default_value_t = 4.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run_config(
    config: Option<PathBuf>,
    seed: Option<String>,
    out: Option<PathBuf>,
    data: Option<PathBuf>,
    overrides: &[String],
) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = config {
        let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.apply(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    }
    if let Some(dir) = data {
        cfg.set("data", &dir.to_string_lossy())?;
    }
    for pair in overrides {
        cfg.set_pair(pair)?;
    }
    if let Some(seeds) = seed {
        cfg.seeds = parse_list("--seed", &seeds)?;
    }
    if let Some(out) = out {
        cfg.out = out;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out, data, overrides } => {
            let cfg = run_config(config, seed, out, data, &overrides)?;
            let report = cmd_run(&cfg)?;
            print!("{}", report.to_text());
            println!("outputs in {}", cfg.out.display());
        }
        Command::Mask { data, rate, mode, seed, out } => {
            let mode = match mode {
                Mode::PerView => MaskMode::PerViewRemoval,
                Mode::Paired => MaskMode::PairedSubset,
            };
            let ds = cmd_mask(&data, &MaskSpec::new(mode, rate, seed), &out)?;
            for v in 0..ds.n_views() {
                let kept = ds.mask(v).iter().filter(|&&a| a).count();
                println!("view {}: {kept} of {} instances available", v + 1, ds.n());
            }
        }
        Command::Eval { pred, truth } => {
            let (acc, nmi) = cmd_eval(&pred, &truth)?;
            println!("ACC {acc:.6}");
            println!("NMI {nmi:.6}");
        }
        Command::Synth { clusters, n, dims, separation, seed, out } => {
            let dims = parse_list("--dims", &dims)?.into_iter().map(|d| d as usize).collect();
            let ds = cmd_synth(&SyntheticSpec { clusters, n, dims, separation, seed }, &out)?;
            println!("wrote {} samples, {} views to {}", ds.n(), ds.n_views(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
