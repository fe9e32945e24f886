//! Visibility theory: source statistics, raw visibility against the intensity
//! ratio, the non-interfering-photon model and visibility estimators.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A value pushed back into its model range, with a flag when that happened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounded {
    pub value: f64,
    pub out_of_domain: bool,
}

impl Bounded {
    fn clamp(raw: f64, lo: f64, hi: f64) -> Self {
        Bounded {
            value: raw.clamp(lo, hi),
            out_of_domain: !(lo..=hi).contains(&raw),
        }
    }
}

/// g2(0) = 2 p2 / p1^2 for a distribution truncated at two photons.
pub fn g2_of_distribution(p0: f64, p1: f64, p2: f64) -> Result<f64> {
    if p1 <= 0.0 {
        return Err(Error::undefined("g2 with no single-photon probability"));
    }
    if p0 < 0.0 || p2 < 0.0 || p0 + p1 + p2 > 1.0 + 1e-12 {
        return Err(Error::invalid("photon-number probabilities out of range"));
    }
    Ok(2.0 * p2 / (p1 * p1))
}

/// <n(n-1)>/<n^2>, a common shorthand for g2. Kept for comparison
/// only; it is not the normalized correlation.
pub fn g2_moment_ratio(p1: f64, p2: f64) -> Result<f64> {
    let n2 = p1 + 4.0 * p2;
    if n2 <= 0.0 {
        return Err(Error::undefined("empty distribution"));
    }
    Ok(2.0 * p2 / n2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityModel {
    pub v_corrected: f64,
    pub g2: f64,
    pub sigma_a: f64,
    pub t_g: f64,
    pub t_p: f64,
    /// I_QD / I_laser.
    pub ratio_qd_over_laser: f64,
}

impl VisibilityModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.v_corrected) {
            return Err(Error::invalid("v_corrected must be in [0, 1]"));
        }
        if self.g2 < 0.0 || self.sigma_a < 0.0 {
            return Err(Error::invalid("g2 and sigma_a must be non-negative"));
        }
        if self.t_g <= 0.0 || self.t_p <= 0.0 || self.ratio_qd_over_laser <= 0.0 {
            return Err(Error::invalid("t_g, t_p and the intensity ratio must be positive"));
        }
        Ok(())
    }

    fn multiphoton_coeff(&self) -> f64 {
        self.g2 * self.sigma_a / 2.0 * self.t_g
    }

    /// I_QD/I_laser that maximizes the raw visibility. Infinite when the
    /// source has no multiphoton part.
    pub fn optimal_ratio(&self) -> f64 {
        let a = self.multiphoton_coeff();
        if a <= 0.0 {
            f64::INFINITY
        } else {
            (0.5 / a).sqrt()
        }
    }
}

/// V_r = V_c / ((g2 sigma_a / 2)(I_QD/I_laser) T_g + 0.5 I_laser/I_QD + 1).
pub fn raw_visibility(m: &VisibilityModel) -> f64 {
    let r = m.ratio_qd_over_laser;
    m.v_corrected / (m.multiphoton_coeff() * r + 0.5 / r + 1.0)
}

/// Which bookkeeping the yields p_I, p_N follow. The interference test uses
/// half the values that enter the protocol error rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum YieldConvention {
    Interference,
    Protocol,
}

/// Converts (p_I, p_N) between conventions.
pub fn convert_yields(p_i: f64, p_n: f64, from: YieldConvention, to: YieldConvention) -> (f64, f64) {
    match (from, to) {
        (YieldConvention::Interference, YieldConvention::Protocol) => (2.0 * p_i, 2.0 * p_n),
        (YieldConvention::Protocol, YieldConvention::Interference) => (p_i / 2.0, p_n / 2.0),
        _ => (p_i, p_n),
    }
}

/// p_N = [(1-V)(p0 a^4/4 + (1-p0) a^2/2) - p0 a^4/4] / (a^2/2), interference convention.
pub fn non_interfering_fraction(v: f64, p0: f64, alpha2: f64) -> Result<Bounded> {
    if alpha2 <= 0.0 {
        return Err(Error::invalid("alpha2 must be positive"));
    }
    let quart = p0 * alpha2 * alpha2 / 4.0;
    let raw = ((1.0 - v) * (quart + (1.0 - p0) * alpha2 / 2.0) - quart) / (alpha2 / 2.0);
    Ok(Bounded::clamp(raw, 0.0, 1.0))
}

/// Visibility implied by (p0, p_N); inverse of [`non_interfering_fraction`].
pub fn visibility_from_noninterfering(p0: f64, p_n: f64, alpha2: f64) -> Result<f64> {
    if alpha2 <= 0.0 {
        return Err(Error::invalid("alpha2 must be positive"));
    }
    let quart = p0 * alpha2 * alpha2 / 4.0;
    let denom = quart + (1.0 - p0) * alpha2 / 2.0;
    if denom <= 0.0 {
        return Err(Error::undefined("visibility with no coincidence sources"));
    }
    Ok(1.0 - (quart + p_n * alpha2 / 2.0) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceDecomposition {
    pub p0: f64,
    pub p_interfering: f64,
    pub p_noninterfering: f64,
    pub alpha2: f64,
    pub eta: f64,
    pub v: f64,
}

/// Error rate as a function of the measured visibility.
pub fn error_from_visibility(d: &InterferenceDecomposition) -> Result<Bounded> {
    let (p0, a2, eta, v) = (d.p0, d.alpha2, d.eta, d.v);
    let k = 1.0 - 2.0 * eta * (1.0 - p0);
    let denom = 4.0 * k * a2 + 4.0 * (1.0 - p0);
    if denom <= 0.0 {
        return Err(Error::undefined("degenerate decomposition (no photons)"));
    }
    let num = 2.0 * k * a2 + 2.0 * (1.0 - p0) * (1.0 - v) - p0 * a2 * v;
    Ok(Bounded::clamp(num / denom, 0.0, 0.5))
}

/// Error rate from protocol-convention yields:
/// [(1 - eta(p_I + p_N)) a^2 + p_N] / [2(1 - eta(p_I + p_N)) a^2 + 2(p_I + p_N)].
pub fn error_from_yields(p_i: f64, p_n: f64, alpha2: f64, eta: f64) -> Result<Bounded> {
    let k = 1.0 - eta * (p_i + p_n);
    let denom = 2.0 * k * alpha2 + 2.0 * (p_i + p_n);
    if denom <= 0.0 {
        return Err(Error::undefined("degenerate yields"));
    }
    Ok(Bounded::clamp((k * alpha2 + p_n) / denom, 0.0, 0.5))
}

/// Click and coincidence probabilities from a two-detector interference test
/// at each node. Index 0..4 are detectors 1..4; pairs are (1,2) and (3,4).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceCounts {
    pub p_click_coh: [f64; 4],
    pub p_click_sp: [f64; 4],
    pub p_coincidence_same: [f64; 2],
}

impl CoincidenceCounts {
    /// Coincidence probability expected for fully distinguishable inputs.
    pub fn distinguishable_prediction(&self, g2: f64) -> [f64; 2] {
        let (c, s) = (self.p_click_coh, self.p_click_sp);
        [(0, 1), (2, 3)].map(|(i, j)| c[i] * c[j] + s[i] * s[j] * g2 + c[i] * s[j] + c[j] * s[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityEstimate {
    pub v_a: f64,
    pub v_b: f64,
    /// Negative visibilities cannot come from the model.
    pub unphysical_a: bool,
    pub unphysical_b: bool,
}

/// V = 1 - P_C / P'_C at each node.
pub fn visibility_from_counts(c: &CoincidenceCounts, g2: f64) -> Result<VisibilityEstimate> {
    let pred = c.distinguishable_prediction(g2);
    if pred.iter().any(|&p| p <= 0.0) {
        return Err(Error::undefined("distinguishable coincidence prediction is zero"));
    }
    let v_a = 1.0 - c.p_coincidence_same[0] / pred[0];
    let v_b = 1.0 - c.p_coincidence_same[1] / pred[1];
    Ok(VisibilityEstimate {
        v_a,
        v_b,
        unphysical_a: v_a < 0.0,
        unphysical_b: v_b < 0.0,
    })
}

/// One row of a per-window calibration table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub window_ps: f64,
    pub v_corrected: f64,
    pub sigma_a: f64,
    pub t_g: f64,
}

pub fn read_calibration(path: &Path) -> Result<Vec<CalibrationRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let expected = ["window_ps", "v_corrected", "sigma_a", "t_g"];
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(expected) {
        return Err(Error::Parse {
            row: 0,
            column: headers.iter().collect::<Vec<_>>().join(","),
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut vals = [0.0; 4];
        for (k, name) in expected.iter().enumerate() {
            let field = rec.get(k).unwrap_or("");
            vals[k] = field.trim().parse().map_err(|_| Error::Parse {
                row: i + 1,
                column: name.to_string(),
                message: format!("not a number: `{field}`"),
            })?;
        }
        out.push(CalibrationRow {
            window_ps: vals[0],
            v_corrected: vals[1],
            sigma_a: vals[2],
            t_g: vals[3],
        });
    }
    Ok(out)
}
