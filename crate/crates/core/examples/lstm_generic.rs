//! TSInsight needs only gradients of the classifier, so it works in front of
//! an LSTM. Class activation maps need a convolutional feature map and are
//! refused.
//!
//! ```text
//! cargo run --release --example lstm_generic -- --train-size 9000 --epochs 10
//! ```

mod common;

use clap::Parser;
use tsinsight::attribution::{attribute, Method, MethodConfig, Models};
use tsinsight::models::ClassifierSpec;
use tsinsight::training::TsInsightConfig;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 9_000)]
    train_size: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> tsinsight::Result<()> {
    let args = Args::parse();
    let data = common::synthetic(args.train_size, args.seed)?;
    let spec = ClassifierSpec::lstm(data.channels(), data.length(), data.class_count());
    let clf = common::classifier(&data, spec, args.epochs, args.seed)?;
    let ae = common::autoencoder(&data, args.epochs, args.seed)?;
    let bundle = common::tsinsight(
        &clf,
        &ae,
        &data,
        &TsInsightConfig::manual(1.0, 0.001),
        args.epochs,
        args.seed,
    )?;

    let x = data.test.instance(0);
    let cfg = MethodConfig::default();
    let map = attribute(Method::Tsinsight, Models::from(&bundle), &x, &cfg)?;
    println!(
        "tsinsight map: shape {:?}, finite {}, max {:.4}",
        map.values.shape(),
        map.values.all_finite(),
        map.values.max()
    );
    for method in [Method::GradCam, Method::GuidedGradCam] {
        match attribute(method, Models::classifier(&clf), &x, &cfg) {
            Ok(_) => println!("{}: unexpectedly produced a map", method.name()),
            Err(e) => println!("{}: {e}", method.name()),
        }
    }
    Ok(())
}
