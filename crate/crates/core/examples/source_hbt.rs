//! Splits a measured source intensity into photon and leaked pump light,
//! then checks g2 with a simulated Hanbury Brown-Twiss run.
//!
//!     cargo run --release --example source_hbt -- 100000000

use relay_qkd::source::{predicted_hbt_g2, simulate_hbt, split_intensity};

fn main() -> relay_qkd::Result<()> {
    let windows: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10_000_000);
    let src = split_intensity(0.05338, 0.0015)?;
    println!("T = {:.6}, leak = {:.4e}", src.t_emit, src.nu_leak);
    println!("predicted g2 = {:.6}", predicted_hbt_g2(&src)?);

    let counts = simulate_hbt(&src, windows, 7);
    println!(
        "{windows} windows: singles {:?}, coincidences {}, g2 = {:.5} +- {:.5}",
        counts.singles,
        counts.coincidences,
        counts.g2()?,
        counts.g2_sigma()?
    );
    Ok(())
}
