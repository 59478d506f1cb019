//! Singular spectrum of the auto-encoder's average Jacobian before and after
//! fine-tuning. A sparser reconstruction shows up as more near-zero values.
//!
//! ```text
//! cargo run --release --example jacobian_spectrum -- --train-size 9000
//! ```

mod common;

use clap::Parser;
use tsinsight::evaluation::{average_jacobian, histogram, singular_spectrum};
use tsinsight::models::AutoEncoder;
use tsinsight::training::TsInsightConfig;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 9_000)]
    train_size: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    sample_count: usize,
    #[arg(long, default_value_t = 1e-2)]
    threshold: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> tsinsight::Result<()> {
    let args = Args::parse();
    let data = common::synthetic(args.train_size, args.seed)?;
    let clf = common::cnn(&data, args.epochs, args.seed)?;
    let ae = common::autoencoder(&data, args.epochs, args.seed)?;
    let ts = common::tsinsight(
        &clf,
        &ae,
        &data,
        &TsInsightConfig::manual(1.0, 0.001),
        args.epochs,
        args.seed,
    )?;
    let pal = common::palacio(&clf, &ae, &data, args.epochs, args.seed)?;

    let show = |name: &str, model: &AutoEncoder| -> tsinsight::Result<()> {
        let j = average_jacobian(
            model,
            &data.test,
            args.sample_count,
            args.seed,
            args.workers,
        )?;
        let spec = singular_spectrum(&j)?;
        let s = &spec.singular_values;
        println!(
            "{name:<11} max {:.4}  min {:.2e}  below {}: {}  ({} sweeps)",
            s[0],
            s[s.len() - 1],
            args.threshold,
            spec.count_below(args.threshold),
            spec.sweeps
        );
        let hist = histogram(s, 10)?;
        for (i, count) in hist.counts.iter().enumerate() {
            println!(
                "    [{:.3}, {:.3})  {count}",
                hist.edges[i],
                hist.edges[i + 1]
            );
        }
        Ok(())
    };
    show("pretrained", &ae)?;
    show("tsinsight", &ts.autoencoder)?;
    show("palacio", &pal.autoencoder)?;
    Ok(())
}
