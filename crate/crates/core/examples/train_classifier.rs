//! Trains a classifier on the synthetic anomaly dataset and prints the fit
//! history.
//!
//! ```text
//! cargo run --release --example train_classifier -- --epochs 20
//! cargo run --release --example train_classifier -- --lstm --train-size 9000
//! ```

mod common;

use clap::Parser;
use tsinsight::models::{Classifier, ClassifierSpec};
use tsinsight::training::train_classifier;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Training rows; validation and test scale with it.
    #[arg(long, default_value_t = 45_000)]
    train_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    lstm: bool,
}

fn main() -> tsinsight::Result<()> {
    let args = Args::parse();
    let data = common::synthetic(args.train_size, args.seed)?;
    let spec = if args.lstm {
        ClassifierSpec::lstm(data.channels(), data.length(), data.class_count())
    } else {
        ClassifierSpec::cnn(data.channels(), data.length(), data.class_count())
    };
    let mut model = Classifier::build(spec, args.seed)?;
    let report = train_classifier(
        &mut model,
        &data,
        &common::train_cfg(args.epochs, args.seed),
    )?;
    for (epoch, (loss, acc)) in report.train_loss.iter().zip(&report.val_metric).enumerate() {
        println!(
            "epoch {:>2}  loss {loss:.4}  val accuracy {acc:.4}",
            epoch + 1
        );
    }
    println!(
        "test accuracy {:.4} (best epoch {}), {:.1}s",
        report.test_metric,
        report.best_epoch.map_or(0, |e| e + 1),
        report.wall_time_secs
    );
    Ok(())
}
