//! `lrcl`: synthetic data, dataset ingestion, contrastive pretraining,
//! finetuning, evaluation and experiment grids from one JSON config.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 corrupt input
//! file, 4 non-finite loss.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use lrcl_core::data::Side;

use commands::{ExperimentKind, Failure, Overrides, Phase};
use config::Config;

#[derive(Parser, Debug)]
#[command(name = "lrcl", version, about = "Left-right contrastive pretraining for wearable accelerometers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON configuration file; omitted keys take their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (output file for `synth`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for data generation, splits, initialization and training.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for parallel kernels and experiment cells (0 = all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Epochs of the phase the command trains.
    #[arg(long)]
    epochs: Option<usize>,
    /// Batch size of the phase the command trains.
    #[arg(long)]
    batch_size: Option<usize>,
    /// NT-Xent temperature.
    #[arg(long)]
    temperature: Option<f64>,
    /// Learning rate of the phase the command trains.
    #[arg(long)]
    lr: Option<f64>,
    /// Keep only this many labels per class for classifier training.
    #[arg(long)]
    labels_per_class: Option<usize>,
    /// Device side used for evaluation (and by pretrain-simclr).
    #[arg(long, value_enum)]
    side: Option<SideArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SideArg {
    Left,
    Right,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum KindArg {
    #[value(name = "reduced_labels", alias = "reduced-labels")]
    ReducedLabels,
    Sweep,
    Repeats,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic left/right dataset file.
    Synth(Common),
    /// Convert MM-Fit or Opportunity recordings into split dataset files.
    Ingest(Common),
    /// Left-right contrastive pretraining of encoder and projection head.
    Pretrain(Common),
    /// Rotation-view contrastive pretraining on one side.
    PretrainSimclr(Common),
    /// Train a classifier on top of a pretrained encoder.
    Finetune(Common),
    /// Train encoder and classifier from scratch.
    Supervised(Common),
    /// Score a finetuned checkpoint on one side of a dataset.
    Evaluate(Common),
    /// Repeated runs, reduced-label curve or batch/latent sweep.
    Experiment {
        #[arg(value_enum)]
        kind: KindArg,
        #[command(flatten)]
        common: Common,
    },
}

fn run(command: Command) -> Result<(), Failure> {
    let (common, phase) = match &command {
        Command::Synth(c) | Command::Ingest(c) | Command::Evaluate(c) => (c, Phase::Both),
        Command::Pretrain(c) | Command::PretrainSimclr(c) => (c, Phase::Pretrain),
        Command::Finetune(c) | Command::Supervised(c) => (c, Phase::Classifier),
        Command::Experiment { common, .. } => (common, Phase::Both),
    };
    let mut cfg = match &common.config {
        Some(p) => Config::load(p).map_err(Failure::usage)?,
        None => Config::default(),
    };
    let overrides = Overrides {
        out: common.out.clone(),
        seed: common.seed,
        epochs: common.epochs,
        batch_size: common.batch_size,
        temperature: common.temperature,
        lr: common.lr,
        labels_per_class: common.labels_per_class,
        side: common.side.map(|s| match s {
            SideArg::Left => Side::Left,
            SideArg::Right => Side::Right,
        }),
    };
    let is_synth = matches!(command, Command::Synth(_));
    overrides.apply(&mut cfg, phase, !is_synth);
    let jobs = common.jobs.unwrap_or(0);
    let out = common.out.clone();
    let seed = common.seed.unwrap_or(cfg.pretrain.seed);

    lrcl_core::par::with_threads(jobs, move || match command {
        Command::Synth(_) => commands::synth(&cfg, out.as_deref()),
        Command::Ingest(_) => commands::ingest(&cfg),
        Command::Pretrain(_) => commands::pretrain(&cfg, false),
        Command::PretrainSimclr(_) => commands::pretrain(&cfg, true),
        Command::Finetune(_) => commands::finetune_cmd(&cfg),
        Command::Supervised(_) => commands::supervised(&cfg),
        Command::Evaluate(_) => commands::evaluate_cmd(&cfg),
        Command::Experiment { kind, .. } => {
            let kind = match kind {
                KindArg::ReducedLabels => ExperimentKind::ReducedLabels,
                KindArg::Sweep => ExperimentKind::Sweep,
                KindArg::Repeats => ExperimentKind::Repeats,
            };
            commands::experiment(&cfg, kind, seed)
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LRCL_LOG", "info"))
        .format_timestamp(None)
        .init();

    let keys = config::keys_help();
    let cmd = Cli::command()
        .after_long_help(keys.clone())
        .mut_subcommands(|sub| sub.after_help(keys.clone()));
    let matches = cmd.get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
