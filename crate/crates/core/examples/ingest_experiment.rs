//! Recomputes decoy bounds and key rates from recorded experiment counts.
//!
//!     cargo run --example ingest_experiment -- path/to/records.csv

use relay_qkd::ingest::{back_solve_phase_error, ingest_record, load_experiment_records, parse_experiment_records};

const BUNDLED: &str = include_str!("../data/field_trial.csv");

fn main() -> relay_qkd::Result<()> {
    let records = match std::env::args().nth(1) {
        Some(p) => load_experiment_records(p.as_ref())?,
        None => parse_experiment_records(BUNDLED)?,
    };
    for rec in records {
        let row = ingest_record(&rec, 1.15)?;
        println!(
            "{:>5} km: Q_mumu {:.3e}, Y1 >= {:.3e}, e_p {:.4}, rate {:.4e}",
            rec.distance_km, row.q_mumu, row.y1_lower, row.e_p, row.per_pulse_rate
        );
        if let Some(e) = back_solve_phase_error(&rec, row.per_pulse_rate * 2.0, 1.15)? {
            println!("        doubling the rate needs e_p = {e:.4}");
        }
    }
    Ok(())
}
