//! Builds the five-node state for one round and prints its click statistics.
//!
//!     cargo run --example fock_interference

use num_complex::Complex64;
use relay_qkd::fock::{five_node_state, ClickPattern, FiveNodeSetup, DEFAULT_CUTOFF};

fn main() -> relay_qkd::Result<()> {
    let mu: f64 = 0.002;
    for (label, phase) in [("matched", 0.0), ("opposite", std::f64::consts::PI)] {
        let setup = FiveNodeSetup {
            alpha: Complex64::from_polar(mu.sqrt(), phase),
            beta: Complex64::new(mu.sqrt(), 0.0),
            t_emit: 1.0,
            eta: [0.325, 0.332, 0.332, 0.325],
            cutoff: DEFAULT_CUTOFF,
        };
        let state = five_node_state(&setup)?;
        let clicks = state.click_distribution(1.0, 0.0)?;
        println!("{label} phases: {} basis terms, norm {:.12}", state.len(), state.norm_sqr());
        println!("  coincidence {:.4e}, cross share {:.4}", clicks.coincidence(), clicks.cross_coincidence() / clicks.coincidence());
        for k in 0..16 {
            let p = ClickPattern::from_index(k);
            if p.is_coincidence() {
                println!("  {p:?}: {:.4e}", clicks.get(p));
            }
        }
    }
    Ok(())
}
