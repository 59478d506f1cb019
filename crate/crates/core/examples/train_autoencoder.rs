//! Pretrains the auto-encoder on reconstruction and shows how closely it
//! copies a few test rows.
//!
//! ```text
//! cargo run --release --example train_autoencoder -- --epochs 20
//! ```

mod common;

use clap::Parser;
use tsinsight::training::reconstruction_mse;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 45_000)]
    train_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> tsinsight::Result<()> {
    let args = Args::parse();
    let data = common::synthetic(args.train_size, args.seed)?;
    let ae = common::autoencoder(&data, args.epochs, args.seed)?;
    println!(
        "test reconstruction MSE {:.5}",
        reconstruction_mse(&ae, &data.test)?
    );

    let head = data.test.head(4);
    let recon = ae.reconstruct(head.inputs())?;
    for i in 0..head.len() {
        let (x, r) = (head.inputs().index(i), recon.index(i));
        let err = x.zip_map(&r, |a, b| (a - b) * (a - b))?.mean();
        println!("row {i}: label {}  mse {err:.5}", head.labels()[i]);
    }
    Ok(())
}
