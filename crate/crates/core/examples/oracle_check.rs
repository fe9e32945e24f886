//! Compares the closed-form gain with a phase-averaged Fock-space simulation
//! over random weak-pulse settings.
//!
//!     cargo run --release --example oracle_check -- 200

use relay_qkd::oracle::gain_suite;

fn main() -> relay_qkd::Result<()> {
    let draws: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let checks = gain_suite(draws, 11)?;
    let worst = checks.iter().max_by(|a, b| a.rel_diff.total_cmp(&b.rel_diff)).unwrap();
    println!("{draws} draws, worst relative difference {:.2e}", worst.rel_diff);
    println!(
        "  at mu {:.2e}, eta {:.3}/{:.3}, T {:.3}: oracle {:.4e}, closed form {:.4e}",
        worst.mu, worst.eta_user, worst.eta_source, worst.t_emit, worst.oracle, worst.analytic
    );
    Ok(())
}
