//! `mmbal`: dataset generation, experiment execution, standalone diagnosis
//! of feature files, probe evaluation, and hyperparameter sweeps.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mmbal_core::balance::SquashKind;
use mmbal_core::clustering::KMeansConfig;
use mmbal_core::trainer::ProbeConfig;

use config::{ExperimentConfig, RawConfig};

#[derive(Parser)]
#[command(
    name = "mmbal",
    version,
    about = "Balanced multimodal training experiments",
    after_help = "The MMBAL_THREADS environment variable caps sweep parallelism."
)]
struct Cli {
    /// Override the config seed (applies before sweeps expand).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (required by gen, train, and sweep).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Commands,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SquashArg {
    Tanh,
    ClippedLinear,
}

impl From<SquashArg> for SquashKind {
    fn from(v: SquashArg) -> SquashKind {
        match v {
            SquashArg::Tanh => SquashKind::Tanh,
            SquashArg::ClippedLinear => SquashKind::ClippedLinear,
        }
    }
}

#[derive(Subcommand)]
enum Commands {
    /// Generate a dataset directory from a config.
    Gen {
        /// Experiment config file.
        config: PathBuf,
    },
    /// Run one training experiment.
    Train {
        /// Experiment config file.
        config: PathBuf,
        /// Load the dataset from this directory instead of generating it.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Diagnose the learning state of one modality from feature files.
    Diagnose {
        /// Train-split feature file (label,f0,...).
        #[arg(long)]
        train: PathBuf,
        /// Validation-split feature file.
        #[arg(long)]
        val: PathBuf,
        /// Number of classes (cluster count).
        #[arg(long)]
        classes: usize,
        /// Strength hyperparameter (must be > 1).
        #[arg(long, default_value_t = 3.0)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = SquashArg::Tanh)]
        squash: SquashArg,
        #[arg(long, default_value_t = 100)]
        kmeans_iters: usize,
        #[arg(long, default_value_t = 5)]
        kmeans_restarts: usize,
        #[arg(long, default_value_t = 1e-6)]
        kmeans_tol: f64,
        /// z-score features before clustering.
        #[arg(long)]
        standardize: bool,
    },
    /// Train a linear probe on dumped embeddings and report test metrics.
    Probe {
        /// Train-split feature file (label,f0,...).
        #[arg(long)]
        train: PathBuf,
        /// Test-split feature file.
        #[arg(long)]
        test: PathBuf,
        /// Number of classes.
        #[arg(long)]
        classes: usize,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        #[arg(long, default_value_t = 0.9)]
        momentum: f64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
    },
    /// Run the Cartesian product of config overrides.
    Sweep {
        /// Base experiment config file.
        config: PathBuf,
        /// Override, e.g. `--set balance.lambda=1,3,5,7` or `--set seed=0..9`.
        #[arg(long = "set")]
        sets: Vec<String>,
        /// Concurrent runs (child processes); default sequential.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
}

fn require_out(out: Option<PathBuf>) -> Result<PathBuf> {
    out.ok_or_else(|| anyhow::anyhow!("--out <DIR> is required for this command"))
}

fn load_config(path: &PathBuf, seed_override: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = seed_override {
        cfg.override_seed(seed);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Commands::Gen { config } => {
            let cfg = load_config(&config, cli.seed)?;
            let out = require_out(cli.out)?;
            commands::gen::run(&cfg, &out, cli.quiet)
        }
        Commands::Train { config, data } => {
            let cfg = load_config(&config, cli.seed)?;
            let out = require_out(cli.out)?;
            commands::train::run(&cfg, data.as_deref(), &out, cli.quiet)?;
            Ok(())
        }
        Commands::Diagnose {
            train,
            val,
            classes,
            lambda,
            squash,
            kmeans_iters,
            kmeans_restarts,
            kmeans_tol,
            standardize,
        } => {
            if classes < 1 {
                bail!("--classes must be >= 1");
            }
            let kmeans_cfg = KMeansConfig {
                k: classes,
                max_iters: kmeans_iters,
                restarts: kmeans_restarts,
                seed: cli.seed.unwrap_or(0),
                tol: kmeans_tol,
                standardize,
            };
            let report =
                commands::diagnose::run(&train, &val, classes, lambda, squash.into(), kmeans_cfg)?;
            println!("{}", serde_json::to_string(&report)?);
            Ok(())
        }
        Commands::Probe {
            train,
            test,
            classes,
            epochs,
            lr,
            momentum,
            batch_size,
        } => {
            let cfg = ProbeConfig {
                epochs,
                lr,
                momentum,
                batch_size,
                seed: cli.seed.unwrap_or(0),
            };
            let report = commands::probe::run(&train, &test, classes, cfg)?;
            println!("{}", serde_json::to_string(&report)?);
            Ok(())
        }
        Commands::Sweep {
            config,
            sets,
            parallel,
        } => {
            let mut raw = RawConfig::load(&config)?;
            if let Some(seed) = cli.seed {
                raw.set("seed", &seed.to_string());
            }
            // The base config must itself be valid before expansion.
            ExperimentConfig::from_raw(raw.clone())?;
            let params = sets
                .iter()
                .map(|s| commands::sweep::parse_set_arg(s))
                .collect::<Result<Vec<_>>>()?;
            let out = require_out(cli.out)?;
            commands::sweep::run(&raw, &params, &out, parallel, cli.quiet)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
