//! Suppression benchmark: classifier accuracy when only the top attributed
//! fraction of features survives, per method.
//!
//! ```text
//! cargo run --release --example suppression_benchmark -- --train-size 9000 --methods random,gradient,tsinsight
//! ```

mod common;

use std::path::PathBuf;

use clap::Parser;
use tsinsight::attribution::{MethodConfig, Models};
use tsinsight::evaluation::{parse_methods, suppression_test, write_curves, SuppressionConfig};
use tsinsight::training::TsInsightConfig;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 9_000)]
    train_size: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "none,random,gradient,integrated_gradients,occlusion,tsinsight"
    )]
    methods: Vec<String>,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    /// Evaluate only the first rows of the test split.
    #[arg(long)]
    max_instances: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV of the curves; a JSON twin is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> tsinsight::Result<()> {
    let args = Args::parse();
    let methods = parse_methods(&args.methods)?;
    let data = common::synthetic(args.train_size, args.seed)?;
    let clf = common::cnn(&data, args.epochs, args.seed)?;
    let ae = common::autoencoder(&data, args.epochs, args.seed)?;
    let bundle = common::tsinsight(
        &clf,
        &ae,
        &data,
        &TsInsightConfig::manual(1.0, 0.001),
        args.epochs,
        args.seed,
    )?;

    let cfg = SuppressionConfig {
        runs: args.runs,
        seed: args.seed,
        max_instances: args.max_instances,
        ..SuppressionConfig::default()
    };
    let mcfg = MethodConfig {
        sg_samples: 20,
        ..MethodConfig::default()
    };
    let curves = suppression_test(Models::from(&bundle), &methods, &data.test, &cfg, &mcfg)?;

    print!("{:<22}", "keep");
    for f in &cfg.fractions {
        print!("{f:>8.2}");
    }
    println!();
    for c in &curves {
        print!("{:<22}", c.method.name());
        for m in &c.accuracy_mean {
            print!("{m:>8.4}");
        }
        println!();
    }
    if let Some(path) = args.out {
        write_curves(&curves, &path)?;
    }
    Ok(())
}
