//! Round-by-round Monte Carlo of the protocol at a preset, then sifting of
//! the retained records.
//!
//!     cargo run --release --example protocol_simulation -- trial_100km 10000000

use relay_qkd::config::RunConfig;
use relay_qkd::sim::{observed_rates, run_protocol, sift_and_map};

fn main() -> relay_qkd::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "trial_100km".into());
    let rounds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(10_000_000);

    let cfg = RunConfig::load(&preset)?;
    let mut sim = cfg.sim_config()?;
    sim.n_rounds = rounds;
    sim.retain_records = true;
    let out = run_protocol(&sim)?;

    let s = out.tally.summary();
    println!("{rounds} rounds, {} coincidences", out.tally.total_coincidences());
    println!("M_00 {}  M_nunu {}  M_mumu {}  raw key {}", s.m_00, s.m_nunu, s.m_mumu, s.raw_key_length);
    for (pair, r) in observed_rates(&out.tally) {
        if r.gain > 0.0 {
            println!("  {pair:>5}: Q = {:.3e} +- {:.1e}", r.gain, r.gain_sigma);
        }
    }
    match sift_and_map(&out.records, sim.consts.d_phases) {
        Ok(sift) => println!("sifted {} of {} records, {} errors", sift.kept, sift.valid, sift.errors),
        Err(e) => println!("nothing to sift: {e}"),
    }
    Ok(())
}
