//! Generates the synthetic anomaly dataset, reports its composition and
//! optionally writes it as CSV.
//!
//! ```text
//! cargo run --release --example gen_synth -- --out data/
//! ```

use std::path::PathBuf;

use clap::Parser;
use tsinsight::data::{
    generate_synthetic_anomaly, synthesize_split, write_csv_dataset, Split, SynthConfig,
};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 45_000)]
    train_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for train.csv, val.csv and test.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> tsinsight::Result<()> {
    let args = Args::parse();
    let cfg = SynthConfig::scaled(args.train_size, args.seed);
    let splits = generate_synthetic_anomaly(&cfg)?;
    for split in Split::ALL {
        let ds = splits.get(split);
        println!(
            "{split:<5} {:>6} rows, anomalous {:.3}",
            ds.len(),
            ds.positive_rate()
        );
    }

    let test = synthesize_split(&cfg, Split::Test)?;
    let mut per_channel = [0usize; 3];
    let mut spikes = 0;
    for list in test.dataset.anomalies().unwrap_or_default() {
        for a in list {
            per_channel[a.channel] += 1;
            spikes += 1;
        }
    }
    println!(
        "test spikes: {spikes} (pressure {}, temperature {}, torque {})",
        per_channel[0], per_channel[1], per_channel[2]
    );
    let shift = test
        .dataset
        .inputs()
        .zip_map(&test.clean_inputs, |a, b| (a - b).abs())?;
    println!("largest spike shift {:.3}", shift.max());

    if let Some(dir) = args.out {
        write_csv_dataset(&splits, &dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
