//! Optimized rate against distance for several extra-error levels, the
//! scaling exponent at long range and the zero-rate cutoff.
//!
//!     cargo run --release --example distance_scan

use relay_qkd::optimizer::{cutoff_distance, fit_scaling_exponent, scan_distance, OptimizerConfig};
use relay_qkd::rates::{LinkBudget, ProtocolConstants, DEFAULT_DARK_PROB};
use relay_qkd::source::SourceModel;

fn main() -> relay_qkd::Result<()> {
    let template = LinkBudget::symmetric(1.0, 1.0, 1.0, DEFAULT_DARK_PROB, 0.0);
    let src = SourceModel::ideal(1.0)?;
    let consts = ProtocolConstants::default();
    let opt = OptimizerConfig::default();
    let distances: Vec<f64> = (0..=60).map(|k| k as f64 * 20.0).collect();

    let curves = scan_distance(&distances, &[0.0, 0.05, 0.09], &template, &src, &consts, true, &opt)?;
    for c in &curves {
        let last = c.points.last().map_or(0.0, |p| p.total_distance);
        println!("e_extra {:.2}: {} points, last positive at {last} km", c.e_extra, c.points.len());
    }

    let fit: Vec<(f64, f64)> = curves[0].points.iter().map(|p| (p.eta_total, p.rate)).collect();
    println!("slope of ln R vs ln eta: {:.3}", fit_scaling_exponent(&fit, (1e-14, 1e-4))?);

    for e in [0.0, 0.05, 0.09] {
        let links = LinkBudget { e_extra: e, ..template };
        match cutoff_distance(0.0, 2000.0, &links, &src, &consts, &opt)? {
            Some(km) => println!("cutoff at e_extra {e}: {km:.0} km"),
            None => println!("cutoff at e_extra {e}: beyond 2000 km"),
        }
    }
    Ok(())
}
