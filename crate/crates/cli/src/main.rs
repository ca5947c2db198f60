//! `tabmae` — pipeline driver: synthetic data, ingestion, pre-training,
//! fine-tuning, and the evaluation protocols, all emitting deterministic
//! JSON/CSV reports plus a manifest per run.

mod manifest;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "tabmae",
    version,
    about = "Masked-autoencoder pre-training and cross-country few-shot transfer evaluation for tabular survey data"
)]
pub struct Cli {
    /// Master seed; overrides any seed found in config files.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Worker threads for folds/resamples/trials; results are identical
    /// for any value.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-country dataset from a JSON config.
    Synth {
        /// SynthConfig JSON (see configs/benchmark_synth.json).
        #[arg(long)]
        config: PathBuf,
        /// Output dataset CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Ingest a raw survey CSV: harmonize, impute, audit, emit dataset CSV.
    Ingest {
        /// Raw CSV with header row (schema columns + country_code + region).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ImputationArg::Median)]
        imputation: ImputationArg,
        #[arg(long)]
        out: PathBuf,
        /// Audit report path (default: <out>.audit.json).
        #[arg(long)]
        audit_out: Option<PathBuf>,
    },
    /// Pre-train the masked autoencoder and write a checkpoint.
    Pretrain {
        #[arg(long)]
        data: PathBuf,
        /// PretrainConfig JSON; flags below override individual fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: PretrainOverrides,
    },
    /// Fine-tune a checkpoint into a classifier (or a seed ensemble).
    Finetune {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Explicit validation dataset; defaults to a stratified 20% split.
        #[arg(long)]
        val_data: Option<PathBuf>,
        /// FinetuneConfig JSON; flags below override individual fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated distinct seeds; trains one member per seed.
        #[arg(long)]
        ensemble_seeds: Option<String>,
        #[command(flatten)]
        overrides: FinetuneOverrides,
    },
    /// Run an evaluation protocol and write report files.
    Eval {
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        #[arg(long)]
        data: PathBuf,
        /// Trained model file (holdout/zeroshot).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Encoder checkpoint (protocols that retrain).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// FinetuneConfig JSON used wherever the protocol fine-tunes.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Held-out fraction for the holdout/bootstrap test side.
        #[arg(long, default_value_t = 0.2)]
        holdout_fraction: f64,
        #[arg(long, default_value_t = 1000)]
        n_resamples: usize,
        /// Country supplying few-shot fine-tuning samples.
        #[arg(long)]
        target_country: Option<String>,
        /// Comma-separated sample sizes (default: 50,100,200,500,1000,2000,5000).
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long, default_value_t = 10)]
        n_seeds: usize,
        #[command(flatten)]
        overrides: FinetuneOverrides,
    },
    /// Permutation feature importance with percentile CIs.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        repeats: usize,
    },
    /// Brier score, ECE, and reliability bins.
    Calibration {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
    /// Per-wealth-quintile AUC audit.
    Equity {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Proxy A-distance between two country groups.
    Divergence {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated source country codes.
        #[arg(long)]
        source_countries: String,
        /// Comma-separated target country codes.
        #[arg(long)]
        target_countries: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random hyperparameter search with the fairness objective.
    Hpo {
        #[arg(long)]
        data: PathBuf,
        /// Countries held out of the search and scored per trial.
        #[arg(long)]
        val_countries: String,
        #[arg(long)]
        trials: usize,
        /// Search log CSV path (best trial JSON lands next to it).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        pretrain_epochs: usize,
        #[arg(long, default_value_t = 100)]
        finetune_max_epochs: usize,
    },
    /// Frozen-encoder sample-complexity curve with c/√n fit.
    TheoryCurve {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated head training sizes (default: 50,100,200,400,800).
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long, default_value_t = 10)]
        n_seeds: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ImputationArg {
    Median,
    ChainedBlind,
    ChainedCongenial,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ProtocolArg {
    Holdout,
    Bootstrap,
    Loco,
    Fewshot,
    Zeroshot,
}

#[derive(Args)]
pub struct PretrainOverrides {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub mask_ratio: Option<f64>,
    #[arg(long)]
    pub hidden1: Option<usize>,
    #[arg(long)]
    pub hidden2: Option<usize>,
}

#[derive(Args)]
pub struct FinetuneOverrides {
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub freeze_encoder: Option<bool>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message; usage problems exit 1
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
