//! Full-size run at 100 km with the aggregate sampler. The extra error is set
//! so the expected QBER matches a measured 9.70%.
//!
//!     cargo run --release --example sift_qber

use relay_qkd::config::RunConfig;
use relay_qkd::rates::error_emu;
use relay_qkd::sim::{calibrate_extra_error, run_protocol_aggregate, Intensity};

fn main() -> relay_qkd::Result<()> {
    let cfg = RunConfig::load("trial_100km")?;
    let src = cfg.source_model()?;
    let intrinsic = error_emu(Intensity::Signal.value(&cfg.protocol), &cfg.links, &src, &cfg.protocol)?.e_mu;
    let e_extra = calibrate_extra_error(0.0970, intrinsic)?;
    println!("intrinsic E_mu {intrinsic:.4}, extra {e_extra:.4}");

    let mut sim = cfg.sim_config()?;
    sim.links.e_extra = e_extra;
    sim.n_rounds = 9_600_000_000_000;
    let t = run_protocol_aggregate(&sim)?;
    let s = t.summary();
    println!("N = {:.3e}, M_mumu = {}, raw key = {}, QBER = {:.4}", s.n as f64, s.m_mumu, s.raw_key_length, s.qber.unwrap_or(f64::NAN));
    Ok(())
}
