//! Command-line front end: one subcommand per pipeline stage, each writing
//! its results and a `manifest.json` under `--out`.
//!
//! Exit codes: 0 on success, 1 for invalid arguments, configs or inputs, 2
//! when a run fails after validation.

mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;

pub use config::{Layers, SECTIONS, SEED_ENV};
pub use manifest::{InputFile, Outputs, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "tsinsight",
    version,
    about = "Time-series attribution workbench"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Directory receiving every output file.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON or TOML file with per-stage sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Global seed; falls back to the config file, then TSINSIGHT_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Threads for attribution and Jacobian work.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Args, Debug, Clone, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct MethodFlags {
    #[arg(long)]
    pub ig_steps: Option<usize>,
    #[arg(long)]
    pub sg_samples: Option<usize>,
    #[arg(long)]
    pub sg_sigma: Option<f64>,
    #[arg(long)]
    pub occlusion_width: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariantArg {
    Cnn,
    Lstm,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveArg {
    Palacio,
    Tsinsight,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScopeArg {
    Dataset,
    Instance,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FillArg {
    Zero,
    /// Per-channel mean of the training split.
    Mean,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the synthetic anomaly dataset as three CSV files.
    GenSynth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train_size: Option<usize>,
        #[arg(long)]
        val_size: Option<usize>,
        #[arg(long)]
        test_size: Option<usize>,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        anomaly_rate: Option<f64>,
        #[arg(long)]
        spike_magnitude: Option<f64>,
    },
    /// Train a classifier on a CSV dataset directory.
    TrainClassifier {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Pretrain the auto-encoder on reconstruction.
    TrainAe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Fine-tune an auto-encoder in front of a frozen classifier.
    Finetune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        autoencoder: PathBuf,
        #[arg(long, value_enum, default_value = "tsinsight")]
        objective: ObjectiveArg,
        #[arg(long, value_enum)]
        scope: Option<ScopeArg>,
        /// Derive the loss weights from classifier saliency.
        #[arg(long)]
        auto_hyper: bool,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        /// Test-split row explained with `--scope instance`.
        #[arg(long)]
        instance: Option<usize>,
        #[arg(long)]
        instance_steps: Option<usize>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Write attribution maps for dataset rows.
    Attribute {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        autoencoder: Option<PathBuf>,
        #[arg(long)]
        method: String,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[command(flatten)]
        method_flags: MethodFlags,
    },
    /// Suppression benchmark: accuracy when only the top attributed features survive.
    SuppressEval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        /// Auto-encoder used by the `tsinsight` method.
        #[arg(long)]
        autoencoder: Option<PathBuf>,
        /// Auto-encoder used by the `palacio` method.
        #[arg(long)]
        palacio_autoencoder: Option<PathBuf>,
        /// Comma-separated method names.
        #[arg(long, value_delimiter = ',', required = true)]
        methods: Vec<String>,
        /// Comma-separated kept fractions.
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        max_instances: Option<usize>,
        #[arg(long, value_enum)]
        fill: Option<FillArg>,
        #[command(flatten)]
        method_flags: MethodFlags,
    },
    /// Singular values of the auto-encoder's average Jacobian.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        autoencoder: PathBuf,
        #[arg(long)]
        sample_count: Option<usize>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Compare every backward rule and objective with central differences.
    GradCheck {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenSynth { .. } => "gen-synth",
            Command::TrainClassifier { .. } => "train-classifier",
            Command::TrainAe { .. } => "train-ae",
            Command::Finetune { .. } => "finetune",
            Command::Attribute { .. } => "attribute",
            Command::SuppressEval { .. } => "suppress-eval",
            Command::Spectrum { .. } => "spectrum",
            Command::GradCheck { .. } => "grad-check",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::GenSynth { common, .. }
            | Command::TrainClassifier { common, .. }
            | Command::TrainAe { common, .. }
            | Command::Finetune { common, .. }
            | Command::Attribute { common, .. }
            | Command::SuppressEval { common, .. }
            | Command::Spectrum { common, .. }
            | Command::GradCheck { common } => common,
        }
    }
}

/// Exit status for an error: 1 when the request itself was unusable, 2 when
/// a valid request failed while running.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig { .. }
        | Error::UnknownMethod(_)
        | Error::UnsupportedVariant { .. }
        | Error::Contract(_)
        | Error::Shape { .. }
        | Error::Csv { .. }
        | Error::Json(_)
        | Error::Toml(_)
        | Error::CheckpointVersion { .. }
        | Error::CheckpointKind { .. }
        | Error::CheckpointManifest(_)
        | Error::CheckpointTruncated(_) => EXIT_INVALID,
        _ => EXIT_FAILED,
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    let started = Instant::now();
    let mut manifest = RunManifest {
        command: cli.command.name().to_string(),
        argv: argv
            .iter()
            .skip(1)
            .map(|a| a.to_string_lossy().into_owned())
            .collect(),
        ..RunManifest::default()
    };
    let out_dir = cli.command.common().out.clone();
    let mut outputs = match Outputs::new(&out_dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILED;
        }
    };
    let result = commands::execute(&cli.command, &mut manifest, &mut outputs);
    let code = match &result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            manifest.error = Some(e.to_string());
            exit_code(e)
        }
    };
    manifest.outputs = outputs.files;
    manifest.exit_code = code;
    manifest.wall_time_secs = started.elapsed().as_secs_f64();
    let path = out_dir.join("manifest.json");
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(Error::from)
        .and_then(|text| std::fs::write(&path, text).map_err(|e| Error::io(&path, e)));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_FAILED;
    }
    code
}
