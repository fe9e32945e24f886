//! Closed-form gains, error rates and key rate for the bundled presets.
//!
//!     cargo run --example rate_report

use relay_qkd::config::{RunConfig, PRESETS};
use relay_qkd::rates::rate_report;

fn main() -> relay_qkd::Result<()> {
    for (name, _) in PRESETS {
        let cfg = RunConfig::preset(name).expect("bundled");
        let src = cfg.source_model()?;
        let r = rate_report(&cfg.links, &src, &cfg.protocol)?;
        println!("{name}");
        println!("  Y1   = {:.4e} (ideal {:.3e}, dark {:.3e}, leak {:.3e})", r.y1_total, r.y1_ideal, r.y1_dark, r.y1_leak);
        println!("  Q_mu = {:.4e} (ideal {:.3e}, dark {:.3e}, leak {:.3e})", r.q_mu_total, r.q_mu_ideal, r.q_mu_dark, r.q_mu_leak);
        println!("  E_mu = {:.4}, e_ph = {:.4}", r.e_mu, r.e_phase_bound);
        println!("  R    = {:.4e} bits/pulse", r.rate_per_pulse);
    }
    Ok(())
}
