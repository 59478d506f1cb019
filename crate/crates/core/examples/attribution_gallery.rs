//! Runs every attribution method on one anomalous test row and reports where
//! each map puts its mass relative to the injected spikes.
//!
//! ```text
//! cargo run --release --example attribution_gallery -- --train-size 9000 --out gallery/
//! ```

mod common;

use std::path::PathBuf;

use clap::Parser;
use tsinsight::attribution::{attribute, write_map_csv, Method, MethodConfig, Models};
use tsinsight::evaluation::keep_set;
use tsinsight::training::TsInsightConfig;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 9_000)]
    train_size: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes one `<method>.csv` per map.
    #[arg(long)]
    out: Option<PathBuf>,
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

    let anomalies = data
        .test
        .anomalies()
        .expect("synthetic rows carry their spikes");
    let row = (0..data.test.len())
        .find(|&i| anomalies[i].len() >= 2)
        .expect("some test row has two spikes");
    let x = data.test.instance(row);
    let length = data.length();
    let spikes: Vec<usize> = anomalies[row]
        .iter()
        .map(|a| a.channel * length + a.time)
        .collect();
    println!(
        "row {row}, spikes at {:?}",
        anomalies[row]
            .iter()
            .map(|a| (a.channel, a.time))
            .collect::<Vec<_>>()
    );

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| tsinsight::Error::io(dir, e))?;
    }
    let cfg = MethodConfig {
        sg_samples: 50,
        ..MethodConfig::default()
    };
    for method in Method::ALL {
        let models = match method {
            Method::Tsinsight => Models::from(&ts),
            Method::Palacio => Models::from(&pal),
            _ => Models::classifier(&clf),
        };
        let map = attribute(method, models, &x, &cfg)?;
        let top = keep_set(map.values.data(), spikes.len());
        let hits = spikes.iter().filter(|s| top.contains(s)).count();
        let mass: f64 = spikes.iter().map(|&s| map.values.data()[s]).sum::<f64>()
            / map.values.sum().max(f64::MIN_POSITIVE);
        println!(
            "{:<22} spikes in top-{}: {hits}  spike mass {mass:.3}",
            method.name(),
            spikes.len()
        );
        if let Some(dir) = &args.out {
            write_map_csv(&map, &dir.join(format!("{}.csv", method.name())))?;
        }
    }
    Ok(())
}
