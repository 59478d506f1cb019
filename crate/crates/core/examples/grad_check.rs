//! Checks every backward rule and every training objective against central
//! differences.
//!
//! ```text
//! cargo run --release --example grad_check -- --seed 7
//! ```

use clap::Parser;
use tsinsight::engine::cases::primitive_checks;
use tsinsight::training::objective_checks;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn main() -> tsinsight::Result<()> {
    let args = Args::parse();
    let mut failed = 0;
    let mut line = |name: String, err: f64| {
        let ok = err < args.tolerance;
        failed += usize::from(!ok);
        println!("{name:<32} {err:.2e}  {}", if ok { "ok" } else { "FAIL" });
    };
    for (kind, report) in primitive_checks(args.seed)? {
        line(format!("{kind:?}"), report.max_relative_error);
    }
    for (name, report) in objective_checks(args.seed)? {
        line(format!("objective {name}"), report.max_relative_error);
    }
    if failed > 0 {
        eprintln!("{failed} checks above {}", args.tolerance);
        std::process::exit(1);
    }
    Ok(())
}
