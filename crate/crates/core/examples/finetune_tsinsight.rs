//! Fine-tunes a pretrained auto-encoder in front of a frozen CNN, either with
//! fixed weights or with weights derived from classifier saliency, and
//! compares accuracy and output sparsity with the Palacio objective.
//!
//! ```text
//! cargo run --release --example finetune_tsinsight -- --train-size 9000
//! cargo run --release --example finetune_tsinsight -- --auto --skip-palacio
//! ```

mod common;

use clap::Parser;
use tsinsight::evaluation::{input_sparsity, output_sparsity};
use tsinsight::models::ModelBundle;
use tsinsight::training::TsInsightConfig;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 45_000)]
    train_size: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.001)]
    beta: f64,
    /// Derive gamma and beta per instance instead.
    #[arg(long)]
    auto: bool,
    #[arg(long)]
    skip_palacio: bool,
    /// Features below this fraction of the instance range count as zero.
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> tsinsight::Result<()> {
    let args = Args::parse();
    let data = common::synthetic(args.train_size, args.seed)?;
    let clf = common::cnn(&data, args.epochs, args.seed)?;
    let ae = common::autoencoder(&data, args.epochs, args.seed)?;
    let ts = if args.auto {
        TsInsightConfig::auto()
    } else {
        TsInsightConfig::manual(args.gamma, args.beta)
    };
    let bundle = common::tsinsight(&clf, &ae, &data, &ts, args.epochs, args.seed)?;

    println!(
        "classifier alone      accuracy {:.4}",
        clf.accuracy(&data.test)?
    );
    println!(
        "input                 near-zero {:.4}",
        input_sparsity(data.test.inputs(), args.threshold)
    );
    let report = |name: &str, acc: f64, (frac, mean_abs): (f64, f64)| {
        println!("{name:<21} accuracy {acc:.4}  near-zero {frac:.4}  mean |r| {mean_abs:.4}");
    };
    let pretrained = ModelBundle::new(clf.clone(), ae.clone())?;
    report(
        "pretrained AE",
        pretrained.accuracy(&data.test)?,
        output_sparsity(&ae, &data.test, args.threshold)?,
    );
    report(
        "tsinsight",
        bundle.accuracy(&data.test)?,
        output_sparsity(&bundle.autoencoder, &data.test, args.threshold)?,
    );
    if !args.skip_palacio {
        let pal = common::palacio(&clf, &ae, &data, args.epochs, args.seed)?;
        report(
            "palacio",
            pal.accuracy(&data.test)?,
            output_sparsity(&pal.autoencoder, &data.test, args.threshold)?,
        );
    }
    Ok(())
}
