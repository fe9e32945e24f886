//! Experiment count tables: loading, decoy-state estimation and the final
//! key length.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::{binary_entropy, phase_error_bound};

/// Column order of the experiment CSV.
pub const COLUMNS: [&str; 15] = [
    "distance_km",
    "gamma",
    "mu",
    "nu",
    "eta_d",
    "total_loss_db",
    "n_total",
    "n_00",
    "n_nunu",
    "n_mumu",
    "m_00",
    "m_nunu",
    "m_mumu",
    "raw_key_length",
    "qber",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub distance_km: f64,
    /// Source intensity per pulse.
    pub gamma: f64,
    pub mu: f64,
    pub nu: f64,
    pub eta_d: f64,
    pub total_loss_db: f64,
    pub n_total: u64,
    pub n_00: u64,
    pub n_nunu: u64,
    pub n_mumu: u64,
    pub m_00: u64,
    pub m_nunu: u64,
    pub m_mumu: u64,
    pub raw_key_length: u64,
    pub qber: f64,
}

impl ExperimentRecord {
    pub fn validate(&self) -> Result<()> {
        for (n, m, label) in [
            (self.n_00, self.m_00, "00"),
            (self.n_nunu, self.m_nunu, "nunu"),
            (self.n_mumu, self.m_mumu, "mumu"),
        ] {
            if m > n {
                return Err(Error::invalid(format!("clicks exceed rounds for pair {label}")));
            }
        }
        if !(0.0..=1.0).contains(&self.qber) {
            return Err(Error::invalid("qber must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn gains(&self) -> Result<[f64; 3]> {
        let g = |m: u64, n: u64, label: &str| {
            if n == 0 {
                Err(Error::undefined(format!("no rounds for pair {label}")))
            } else {
                Ok(m as f64 / n as f64)
            }
        };
        Ok([
            g(self.m_00, self.n_00, "00")?,
            g(self.m_nunu, self.n_nunu, "nunu")?,
            g(self.m_mumu, self.n_mumu, "mumu")?,
        ])
    }
}

fn field<T: FromStr>(rec: &csv::StringRecord, row: usize, col: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(col).ok_or_else(|| Error::Parse {
        row,
        column: COLUMNS[col].into(),
        message: "missing field".into(),
    })?;
    raw.trim().parse().map_err(|e: T::Err| Error::Parse {
        row,
        column: COLUMNS[col].into(),
        message: format!("cannot parse {raw:?}: {e}"),
    })
}

/// Reads experiment rows. Rows are numbered from 1 after the header.
pub fn load_experiment_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_experiment_records(&text)
}

pub fn parse_experiment_records(text: &str) -> Result<Vec<ExperimentRecord>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    for (i, name) in COLUMNS.iter().enumerate() {
        if header.get(i).map(str::trim) != Some(*name) {
            return Err(Error::Parse {
                row: 0,
                column: (*name).into(),
                message: format!("expected header `{name}` at position {}", i + 1),
            });
        }
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let r = ExperimentRecord {
            distance_km: field(&rec, row, 0)?,
            gamma: field(&rec, row, 1)?,
            mu: field(&rec, row, 2)?,
            nu: field(&rec, row, 3)?,
            eta_d: field(&rec, row, 4)?,
            total_loss_db: field(&rec, row, 5)?,
            n_total: field(&rec, row, 6)?,
            n_00: field(&rec, row, 7)?,
            n_nunu: field(&rec, row, 8)?,
            n_mumu: field(&rec, row, 9)?,
            m_00: field(&rec, row, 10)?,
            m_nunu: field(&rec, row, 11)?,
            m_mumu: field(&rec, row, 12)?,
            raw_key_length: field(&rec, row, 13)?,
            qber: field(&rec, row, 14)?,
        };
        r.validate().map_err(|e| Error::Parse {
            row,
            column: "record".into(),
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_experiment_records(path: &Path, rows: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Two-decoy lower bound on the single-photon yield from vacuum, decoy and
/// signal gains at intensities `nu` < `mu`.
pub fn decoy_y1_lower(q0: f64, q_nu: f64, q_mu: f64, nu: f64, mu: f64) -> Result<f64> {
    if !(0.0 < nu && nu < mu) {
        return Err(Error::invalid(format!("need 0 < nu < mu, got nu={nu} mu={mu}")));
    }
    if q0 < 0.0 || q_nu < 0.0 || q_mu < 0.0 {
        return Err(Error::invalid("gains must be non-negative"));
    }
    let mu2 = mu * mu;
    let nu2 = nu * nu;
    let bound = mu / (mu * nu - nu2)
        * (q_nu * nu.exp() - nu2 / mu2 * q_mu * mu.exp() - (mu2 - nu2) / mu2 * q0);
    Ok(bound.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyLength {
    /// Clamped at zero.
    pub per_pulse_rate: f64,
    pub final_bits: f64,
    pub raw_rate: f64,
}

/// (raw_key_length / n_total)(1 - h(e_p) - f h(qber)).
pub fn compute_key_length(rec: &ExperimentRecord, e_p: f64, f: f64) -> Result<KeyLength> {
    if rec.n_total == 0 {
        return Err(Error::undefined("record has no rounds"));
    }
    let sifted = rec.raw_key_length as f64 / rec.n_total as f64;
    let raw = sifted * (1.0 - binary_entropy(e_p.min(0.5))? - f * binary_entropy(rec.qber.min(0.5))?);
    let per_pulse = raw.max(0.0);
    Ok(KeyLength {
        per_pulse_rate: per_pulse,
        final_bits: per_pulse * rec.n_total as f64,
        raw_rate: raw,
    })
}

/// Phase error that makes the key rate of `rec` equal `rate`, by bisection on
/// [0, 0.5]. None if no such value exists.
pub fn back_solve_phase_error(rec: &ExperimentRecord, rate: f64, f: f64) -> Result<Option<f64>> {
    let at = |e: f64| compute_key_length(rec, e, f).map(|k| k.raw_rate);
    let (mut lo, mut hi) = (0.0, 0.5);
    if at(lo)? < rate || at(hi)? > rate {
        return Ok(None);
    }
    for _ in 0..100 {
        let mid = (lo + hi) / 2.0;
        if at(mid)? > rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some((lo + hi) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IngestRow {
    pub distance_km: f64,
    pub q_00: f64,
    pub q_nunu: f64,
    pub q_mumu: f64,
    pub y1_lower: f64,
    pub q1: f64,
    pub e_p: f64,
    pub f: f64,
    pub per_pulse_rate: f64,
    pub raw_rate: f64,
    pub final_bits: f64,
}

/// Gains from counts, the decoy bound on Y1, the phase-error bound and the
/// key rate. Only diagonal pairs are recorded, so e_p is a bound computed
/// from them, not a point estimate. The bound works in total intensity: both
/// users' pulses meet at the relay, so a pair at per-user intensity mu is a
/// Poisson source of mean 2 mu.
pub fn ingest_record(rec: &ExperimentRecord, f: f64) -> Result<IngestRow> {
    let [q0, qn, qm] = rec.gains()?;
    let (nu_t, mu_t) = (2.0 * rec.nu, 2.0 * rec.mu);
    let y1 = decoy_y1_lower(q0, qn, qm, nu_t, mu_t)?;
    let (q1, e_p) = phase_error_bound(y1, qm, mu_t)?;
    let k = compute_key_length(rec, e_p, f)?;
    Ok(IngestRow {
        distance_km: rec.distance_km,
        q_00: q0,
        q_nunu: qn,
        q_mumu: qm,
        y1_lower: y1,
        q1,
        e_p,
        f,
        per_pulse_rate: k.per_pulse_rate,
        raw_rate: k.raw_rate,
        final_bits: k.final_bits,
    })
}

pub fn write_ingest_csv(path: &Path, rows: &[IngestRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_ingest_csv(path: &Path) -> Result<Vec<IngestRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
