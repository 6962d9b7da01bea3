mod config;
mod corpus;
mod ensemble;
mod prepare;
mod report;
mod training;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use depscreen_core::backend::BackendConfig;
use depscreen_core::imbalance::ImbalanceStrategy;

use crate::config::Config;

/// Depression-severity classification experiments: data preparation,
/// fine-tuning, cross-validation, ensembling, evaluation and corpus curation.
#[derive(Debug, Parser)]
#[command(name = "depscreen", version)]
struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fold the combined train+dev set and write data reports.
    Prepare(ConfigArgs),
    /// Train once on train, early-stopping on dev.
    Train(TrainArgs),
    /// Run every point of the configured grid on train/dev.
    GridSearch(ConfigArgs),
    /// K-fold cross-validation over the prepared folds.
    Cv(TrainArgs),
    /// Combine prediction records into a submission file.
    Ensemble(ensemble::EnsembleArgs),
    /// Score a submission or prediction records against gold labels.
    Evaluate(ensemble::EvaluateArgs),
    /// Curate a domain-adaptation corpus from ranked community listings.
    CorpusBuild(corpus::CorpusArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set trainer.learning_rate=1e-5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (run.dir).
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Backend name: toy-linear, toy-transformer or external.
    #[arg(long)]
    backend: Option<String>,
    /// Training seed (trainer.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Imbalance strategy: none, undersample, oversample or weights.
    #[arg(long)]
    strategy: Option<ImbalanceStrategy>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<Config> {
        let mut config = Config::load(self.config.as_deref(), &self.overrides)?;
        if let Some(dir) = &self.run_dir {
            config.run.dir = dir.clone();
        }
        if let Some(name) = &self.backend {
            if config.backend.name() != name {
                config.backend = BackendConfig::from_name(name)?;
            }
        }
        if let Some(seed) = self.seed {
            config.trainer.seed = seed;
        }
        if let Some(strategy) = self.strategy {
            config.imbalance.strategy = strategy;
        }
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Trial config JSON (e.g. a grid search's best_config.json) replacing
    /// the [trainer], [truncation] and [imbalance] settings.
    #[arg(long)]
    trial_config: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(args) => prepare::run(&args.resolve()?),
        Command::Train(args) => training::train(&args.config.resolve()?, args.trial_config.as_deref()),
        Command::GridSearch(args) => training::grid_search(&args.resolve()?),
        Command::Cv(args) => training::cv(&args.config.resolve()?, args.trial_config.as_deref()),
        Command::Ensemble(args) => ensemble::run_ensemble(&args),
        Command::Evaluate(args) => ensemble::evaluate(&args),
        Command::CorpusBuild(args) => corpus::run(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
