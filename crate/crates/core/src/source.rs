//! Imperfect single-photon source: a true single-photon part with emission
//! probability T plus a leaked, non-interfering coherent part of intensity nu.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    /// Mean photon number per pulse entering the relay splitter.
    pub intensity_total: f64,
    pub g2: f64,
    pub t_emit: f64,
    pub nu_leak: f64,
}

/// nu/T implied by a measured g2.
pub fn leak_ratio_from_g2(g2: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&g2) {
        return Err(Error::invalid(format!("g2 must be in [0, 1), got {g2}")));
    }
    Ok(g2 / 2.0 / (1.0 - g2))
}

/// Splits a measured intensity I = T + nu using the g2 relation.
pub fn split_intensity(intensity_total: f64, g2: f64) -> Result<SourceModel> {
    if intensity_total.is_nan() || intensity_total < 0.0 {
        return Err(Error::invalid("intensity must be non-negative"));
    }
    let rho = leak_ratio_from_g2(g2)?;
    Ok(SourceModel {
        intensity_total,
        g2,
        t_emit: intensity_total / (1.0 + rho),
        nu_leak: intensity_total * rho / (1.0 + rho),
    })
}

/// g2 measured by a 50:50 HBT setup on the two-component source.
pub fn predicted_hbt_g2(m: &SourceModel) -> Result<f64> {
    let (t, nu) = (m.t_emit, m.nu_leak);
    if t + nu <= 0.0 {
        return Err(Error::undefined("g2 of a source with zero intensity"));
    }
    let half = nu / 2.0;
    Ok((half + t) * half / ((t / 2.0 + half) * (t / 2.0 + half)))
}

impl SourceModel {
    /// Source with a given emission probability; the leak follows from g2.
    pub fn from_emission(t_emit: f64, g2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t_emit) {
            return Err(Error::invalid(format!("t_emit must be in [0, 1], got {t_emit}")));
        }
        let nu = t_emit * leak_ratio_from_g2(g2)?;
        Ok(SourceModel {
            intensity_total: t_emit + nu,
            g2,
            t_emit,
            nu_leak: nu,
        })
    }

    /// Perfect emitter with no leak.
    pub fn ideal(t_emit: f64) -> Result<Self> {
        Self::from_emission(t_emit, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_emit < 0.0 || self.nu_leak < 0.0 || self.t_emit > 1.0 {
            return Err(Error::invalid("source components out of range"));
        }
        if !(0.0..1.0).contains(&self.g2) {
            return Err(Error::invalid("g2 must be in [0, 1)"));
        }
        if (self.intensity_total - self.t_emit - self.nu_leak).abs() > 1e-12 {
            return Err(Error::invalid("intensity_total != t_emit + nu_leak"));
        }
        Ok(())
    }
}

/// Counts from a simulated Hanbury-Brown-Twiss measurement with ideal
/// threshold detectors behind a 50:50 splitter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HbtCounts {
    pub windows: u64,
    pub singles: [u64; 2],
    pub coincidences: u64,
}

impl HbtCounts {
    pub fn g2(&self) -> Result<f64> {
        if self.singles[0] == 0 || self.singles[1] == 0 {
            return Err(Error::undefined("no singles recorded"));
        }
        Ok(self.coincidences as f64 * self.windows as f64
            / (self.singles[0] as f64 * self.singles[1] as f64))
    }

    /// Counting error, dominated by the coincidence count.
    pub fn g2_sigma(&self) -> Result<f64> {
        let g = self.g2()?;
        let c = (self.coincidences.max(1)) as f64;
        let s0 = self.singles[0] as f64;
        let s1 = self.singles[1] as f64;
        Ok(g * (1.0 / c + 1.0 / s0 + 1.0 / s1).sqrt())
    }

    fn merge(mut self, o: HbtCounts) -> HbtCounts {
        self.windows += o.windows;
        self.singles[0] += o.singles[0];
        self.singles[1] += o.singles[1];
        self.coincidences += o.coincidences;
        self
    }
}

const HBT_BATCH: u64 = 1 << 20;

/// Samples `windows` pulses: the single photon picks an output port at random,
/// the leak sends an independent Poisson field of intensity nu/2 to each port.
pub fn simulate_hbt(src: &SourceModel, windows: u64, seed: u64) -> HbtCounts {
    let p_leak = 1.0 - (-src.nu_leak / 2.0).exp();
    let batches = windows.div_ceil(HBT_BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let n = HBT_BATCH.min(windows - b * HBT_BATCH);
            let mut c = HbtCounts {
                windows: n,
                ..Default::default()
            };
            for _ in 0..n {
                let mut click = [rng.random::<f64>() < p_leak, rng.random::<f64>() < p_leak];
                if rng.random::<f64>() < src.t_emit {
                    click[rng.random::<bool>() as usize] = true;
                }
                c.singles[0] += click[0] as u64;
                c.singles[1] += click[1] as u64;
                c.coincidences += (click[0] && click[1]) as u64;
            }
            c
        })
        .reduce(HbtCounts::default, HbtCounts::merge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn leak_ratio_examples() {
        assert_eq!(leak_ratio_from_g2(0.0).unwrap(), 0.0);
        assert_relative_eq!(leak_ratio_from_g2(0.0015).unwrap(), 7.5113e-4, max_relative = 1e-4);
        // 0.001 / 0.998
        assert_relative_eq!(leak_ratio_from_g2(0.002).unwrap(), 1.002004e-3, max_relative = 1e-6);
        assert!(leak_ratio_from_g2(1.0).is_err());
    }

    #[test]
    fn split_examples() {
        let s = split_intensity(0.05338, 0.0015).unwrap();
        assert_relative_eq!(s.t_emit, 0.053340, max_relative = 1e-4);
        assert_relative_eq!(s.nu_leak, 4.006e-5, max_relative = 1e-3);
        assert!((s.t_emit + s.nu_leak - 0.05338).abs() < 1e-12);
        let z = split_intensity(0.0, 0.3).unwrap();
        assert_eq!((z.t_emit, z.nu_leak), (0.0, 0.0));
        let p = split_intensity(0.2, 0.0).unwrap();
        assert_eq!((p.t_emit, p.nu_leak), (0.2, 0.0));
    }

    #[test]
    fn hbt_examples() {
        let s = split_intensity(0.05, 0.0).unwrap();
        assert_eq!(predicted_hbt_g2(&s).unwrap(), 0.0);
        let s = split_intensity(0.05, 0.0015).unwrap();
        assert!((predicted_hbt_g2(&s).unwrap() - 0.0015).abs() < 1e-5);
        let eq = SourceModel { intensity_total: 0.2, g2: 0.5, t_emit: 0.1, nu_leak: 0.1 };
        assert_relative_eq!(predicted_hbt_g2(&eq).unwrap(), 0.75, epsilon = 1e-15);
        let dark = SourceModel { intensity_total: 0.0, g2: 0.0, t_emit: 0.0, nu_leak: 0.0 };
        assert!(predicted_hbt_g2(&dark).is_err());
    }

    #[test]
    fn hbt_simulation_is_seeded() {
        let s = split_intensity(0.05, 0.01).unwrap();
        assert_eq!(simulate_hbt(&s, 3_000_000, 5), simulate_hbt(&s, 3_000_000, 5));
    }
}
