//! Instrument phase drift between the two interferometers, its estimation from
//! reference pulses, and the error left after compensation.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference-pulse phase settings, in the order used by [`ReferenceBlock`].
pub const REFERENCE_PHASES: [f64; 3] = [0.0, PI / 2.0, -PI / 2.0];
const UNWRAP_LO: f64 = -2.0 * PI;
const UNWRAP_HI: f64 = 4.0 * PI;
/// Signal light travels at about 2e8 m/s in fiber.
const FIBER_SPEED_KM_PER_S: f64 = 2.0e5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    /// Wiener coefficient, rad^2/s.
    pub diffusion: f64,
    /// Uncompensated frequency offset, Hz.
    pub residual_freq: f64,
    /// Estimation cadence, s.
    pub interval: f64,
    /// Age of the reference data when its estimate is first applied, s.
    #[serde(default)]
    pub delay: f64,
    /// Expected detected reference photons per node per interval.
    pub ref_photons: f64,
    /// Share of reference photons at phases 0, +pi/2, -pi/2.
    #[serde(default = "equal_thirds")]
    pub phase_fractions: [f64; 3],
}

fn equal_thirds() -> [f64; 3] {
    [1.0 / 3.0; 3]
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            diffusion: 10.0,
            residual_freq: 0.0,
            interval: 100e-6,
            delay: 0.0,
            ref_photons: 1e4,
            phase_fractions: equal_thirds(),
        }
    }
}

impl DriftConfig {
    /// Drift for a link of `total_km`: diffusion grows with fiber length and the
    /// estimate arrives one fiber transit late. The default diffusion gives
    /// radian-scale wander over 100 ms at 100 km.
    pub fn for_distance(total_km: f64) -> Self {
        DriftConfig {
            diffusion: 0.1 * total_km,
            delay: total_km / 2.0 / FIBER_SPEED_KM_PER_S,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.diffusion < 0.0 {
            return Err(Error::invalid("diffusion must be non-negative"));
        }
        if self.interval <= 0.0 {
            return Err(Error::invalid("interval must be positive"));
        }
        if self.delay < 0.0 || self.ref_photons < 0.0 {
            return Err(Error::invalid("delay and ref_photons must be non-negative"));
        }
        let s: f64 = self.phase_fractions.iter().sum();
        if self.phase_fractions.iter().any(|&f| f < 0.0) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("phase fractions must be non-negative and sum to 1"));
        }
        Ok(())
    }
}

/// Regularly sampled drift path, value k at time k*dt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPath {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl DriftPath {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 * self.dt
    }

    /// Value at the last sample not after `t`.
    pub fn at(&self, t: f64) -> f64 {
        let k = ((t / self.dt).floor().max(0.0) as usize).min(self.values.len() - 1);
        self.values[k]
    }
}

/// Wiener drift plus a linear ramp 2 pi f t, starting at zero.
pub fn simulate_drift(cfg: &DriftConfig, duration: f64, dt: f64, seed: u64) -> Result<DriftPath> {
    cfg.validate()?;
    if duration <= 0.0 || dt <= 0.0 {
        return Err(Error::invalid("duration and dt must be positive"));
    }
    let n = (duration / dt).ceil() as usize;
    let step = Normal::new(0.0, (cfg.diffusion * dt).sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walk = 0.0;
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        values.push(walk + TAU * cfg.residual_freq * k as f64 * dt);
        walk += step.sample(&mut rng);
    }
    Ok(DriftPath { dt, values })
}

/// Reference counts n[detector][phase setting], detectors 1..4 and settings
/// ordered as [`REFERENCE_PHASES`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceBlock {
    pub counts: [[u64; 3]; 4],
}

/// Detector fractions for one node: first detector sees (1 + cos(theta + phi))/2.
fn node_split(theta: f64, phi: f64) -> f64 {
    (1.0 + (theta + phi).cos()) / 2.0
}

impl ReferenceBlock {
    /// Expected counts with no shot noise, for node phases theta_a and theta_b
    /// and `photons` per node.
    pub fn expected(theta_a: f64, theta_b: f64, photons: f64, fractions: [f64; 3]) -> [[f64; 3]; 4] {
        let mut c = [[0.0; 3]; 4];
        for (p, &phi) in REFERENCE_PHASES.iter().enumerate() {
            let n = photons * fractions[p];
            let (fa, fb) = (node_split(theta_a, phi), node_split(theta_b, phi));
            c[0][p] = n * fa;
            c[1][p] = n * (1.0 - fa);
            c[2][p] = n * fb;
            c[3][p] = n * (1.0 - fb);
        }
        c
    }

    /// Poisson-sampled reference counts.
    pub fn sample<R: Rng>(theta_a: f64, theta_b: f64, photons: f64, fractions: [f64; 3], rng: &mut R) -> Self {
        let mean = Self::expected(theta_a, theta_b, photons, fractions);
        let mut counts = [[0u64; 3]; 4];
        for (d, row) in mean.iter().enumerate() {
            for (p, &m) in row.iter().enumerate() {
                counts[d][p] = if m > 0.0 {
                    Poisson::new(m).map(|dist| dist.sample(rng) as u64).unwrap_or(0)
                } else {
                    0
                };
            }
        }
        ReferenceBlock { counts }
    }

    /// Rounds expected counts; exact for integer-valued inputs.
    pub fn from_expected(mean: [[f64; 3]; 4]) -> Self {
        ReferenceBlock {
            counts: mean.map(|row| row.map(|m| m.round() as u64)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    pub cos: f64,
    pub sin: f64,
    pub theta_unwrapped: f64,
}

fn contrast(n1: u64, n2: u64) -> Option<f64> {
    let s = n1 + n2;
    (s > 0).then(|| (n1 as f64 - n2 as f64) / s as f64)
}

/// cos and sin of one node's phase from its two detectors.
fn node_phase(block: &ReferenceBlock, d1: usize, d2: usize) -> Option<(f64, f64)> {
    let c = &block.counts;
    let cos = contrast(c[d1][0], c[d2][0])?;
    let minus_sin = contrast(c[d1][1], c[d2][1])?;
    let sin = contrast(c[d1][2], c[d2][2])?;
    Some((cos, (sin - minus_sin) / 2.0))
}

/// Picks the 2 pi branch of `base` nearest `prior` and folds it into [-2 pi, 4 pi).
pub fn unwrap_near(base: f64, prior: Option<f64>) -> f64 {
    let mut theta = match prior {
        Some(p) => base + TAU * ((p - base) / TAU).round(),
        None => base,
    };
    while theta < UNWRAP_LO {
        theta += TAU;
    }
    while theta >= UNWRAP_HI {
        theta -= TAU;
    }
    theta
}

/// Relative phase theta_A - theta_B from one reference block.
pub fn estimate_phase(block: &ReferenceBlock, prior: Option<f64>) -> Result<PhaseEstimate> {
    let (ca, sa) = node_phase(block, 0, 1).ok_or_else(|| Error::undefined("no counts at node A"))?;
    let (cb, sb) = node_phase(block, 2, 3).ok_or_else(|| Error::undefined("no counts at node B"))?;
    let cos = ca * cb + sa * sb;
    let sin = sa * cb - ca * sb;
    Ok(PhaseEstimate {
        cos,
        sin,
        theta_unwrapped: unwrap_near(sin.atan2(cos), prior),
    })
}

/// sin^2 of half the phase error: the error it adds to the matched branch.
pub fn misalignment_error(truth: f64, estimate: f64) -> f64 {
    let s = ((truth - estimate) / 2.0).sin();
    s * s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    /// Start of the interval the estimate is applied to.
    pub t: f64,
    /// True drift when the reference block was taken.
    pub truth: f64,
    pub estimate: f64,
}

/// One estimate per interval, from reference pulses taken `delay` before the
/// interval starts. A block without usable counts repeats the last estimate.
pub fn track_phase(path: &DriftPath, cfg: &DriftConfig, seed: u64) -> Result<Vec<TrackPoint>> {
    cfg.validate()?;
    let n = (path.duration() / cfg.interval).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prior: Option<f64> = None;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * cfg.interval;
        let truth = path.at((t - cfg.delay).max(0.0));
        // The relay's own reference phase is arbitrary and cancels.
        let relay = rng.random::<f64>() * TAU;
        let block = ReferenceBlock::sample(truth + relay, relay, cfg.ref_photons, cfg.phase_fractions, &mut rng);
        let estimate = match estimate_phase(&block, prior) {
            Ok(e) => e.theta_unwrapped,
            Err(_) => prior.unwrap_or(0.0),
        };
        prior = Some(estimate);
        out.push(TrackPoint { t, truth, estimate });
    }
    Ok(out)
}

/// Mean misalignment over the path, each sample compensated with the estimate
/// of its interval.
pub fn compensation_residual(path: &DriftPath, track: &[TrackPoint], cfg: &DriftConfig) -> Result<f64> {
    if track.is_empty() || path.values.is_empty() {
        return Err(Error::invalid("path shorter than one interval"));
    }
    let mut sum = 0.0;
    for (k, &v) in path.values.iter().enumerate() {
        let idx = ((path.time(k) / cfg.interval) as usize).min(track.len() - 1);
        sum += misalignment_error(v, track[idx].estimate);
    }
    Ok(sum / path.values.len() as f64)
}

/// Residual phase per interval (truth at mid-interval minus the estimate),
/// for driving the protocol simulator.
pub fn interval_residuals(cfg: &DriftConfig, n_intervals: usize, seed: u64) -> Result<Vec<f64>> {
    let duration = n_intervals as f64 * cfg.interval;
    let path = simulate_drift(cfg, duration, cfg.interval / 2.0, seed)?;
    let track = track_phase(&path, cfg, seed ^ 0x9e37_79b9_7f4a_7c15)?;
    Ok(track
        .iter()
        .take(n_intervals)
        .map(|p| path.at(p.t + cfg.interval / 2.0) - p.estimate)
        .collect())
}

/// Path CSV with columns t_s, delta_theta_rad, estimate_rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub t_s: f64,
    pub delta_theta_rad: f64,
    pub estimate_rad: f64,
}

pub fn path_rows(path: &DriftPath, track: &[TrackPoint], cfg: &DriftConfig) -> Vec<PathRow> {
    path.values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let t = path.time(k);
            let idx = ((t / cfg.interval) as usize).min(track.len().saturating_sub(1));
            PathRow {
                t_s: t,
                delta_theta_rad: v,
                estimate_rad: track.get(idx).map_or(f64::NAN, |p| p.estimate),
            }
        })
        .collect()
}

pub fn write_path_csv(path: &Path, rows: &[PathRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_path_csv(path: &Path) -> Result<Vec<PathRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
