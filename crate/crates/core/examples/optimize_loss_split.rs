//! Optimizes the signal intensity, with and without moving fiber loss between
//! the user spans and the source spans.
//!
//!     cargo run --release --example optimize_loss_split -- 300

use relay_qkd::config::RunConfig;
use relay_qkd::optimizer::{optimize_at_distance, OptimizerConfig};

fn main() -> relay_qkd::Result<()> {
    let km: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100.0);
    let cfg = RunConfig::load("trial_100km")?;
    let src = cfg.source_model()?;
    let opt = OptimizerConfig::default();

    for free in [false, true] {
        let r = optimize_at_distance(km, &cfg.links, &src, &cfg.protocol, free, &opt)?;
        let b = &r.best;
        println!(
            "{} split: mu {:.4e}, split {:.3}, rate {:.4e} ({} evaluations)",
            if free { "free " } else { "fixed" },
            b.params.mu,
            b.loss_split,
            b.rate,
            r.evaluations
        );
        if let Some(d) = r.diagnostic {
            println!("  {d}");
        }
    }
    Ok(())
}
