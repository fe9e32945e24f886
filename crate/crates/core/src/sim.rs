//! Round-by-round Monte Carlo of the protocol: intensity and phase draws,
//! click sampling from cached exact statistics, announcements, sifting and
//! key mapping.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ClickDistribution, ClickPattern, DEFAULT_CUTOFF};
use crate::oracle;
use crate::phase_ref::{self, DriftConfig};
use crate::rates::{LinkBudget, ProtocolConstants};
use crate::source::SourceModel;
use crate::stats::poisson_sigma;

pub const DEFAULT_CACHE_RESOLUTION: u32 = 256;
/// 100 us of 200 MHz pulses with the reference share removed.
pub const DEFAULT_ROUNDS_PER_INTERVAL: u64 = 20_000;
const BATCH: u64 = 1 << 16;
const DRIFT_STREAM: u64 = 0x5eed_d81f;
/// Drift intervals simulated explicitly by the aggregate sampler.
pub const MAX_DRIFT_INTERVALS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Intensity {
    Vacuum,
    Decoy,
    Signal,
}

impl Intensity {
    pub const ALL: [Intensity; 3] = [Intensity::Vacuum, Intensity::Decoy, Intensity::Signal];

    fn tag(self) -> &'static str {
        match self {
            Intensity::Vacuum => "0",
            Intensity::Decoy => "nu",
            Intensity::Signal => "mu",
        }
    }

    pub fn value(self, consts: &ProtocolConstants) -> f64 {
        match self {
            Intensity::Vacuum => 0.0,
            Intensity::Decoy => consts.nu,
            Intensity::Signal => consts.mu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairLabel {
    pub a: Intensity,
    pub b: Intensity,
}

impl PairLabel {
    pub const VACUUM: PairLabel = PairLabel { a: Intensity::Vacuum, b: Intensity::Vacuum };
    pub const DECOY: PairLabel = PairLabel { a: Intensity::Decoy, b: Intensity::Decoy };
    pub const SIGNAL: PairLabel = PairLabel { a: Intensity::Signal, b: Intensity::Signal };

    pub fn index(self) -> usize {
        self.a as usize * 3 + self.b as usize
    }

    pub fn from_index(i: usize) -> Self {
        PairLabel { a: Intensity::ALL[i / 3], b: Intensity::ALL[i % 3] }
    }

    pub fn all() -> impl Iterator<Item = PairLabel> {
        (0..9).map(Self::from_index)
    }

    /// "00", "nunu", "mumu", "0mu", ...
    pub fn name(self) -> String {
        format!("{}{}", self.a.tag(), self.b.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundDraw {
    pub intensity_a: Intensity,
    pub intensity_b: Intensity,
    pub kappa_a: u8,
    pub kappa_b: u8,
    pub phi_a: u16,
    pub phi_b: u16,
    pub delta_theta: f64,
}

impl RoundDraw {
    pub fn pair(&self) -> PairLabel {
        PairLabel { a: self.intensity_a, b: self.intensity_b }
    }

    /// Alice's optical phase minus Bob's.
    pub fn relative_phase(&self, d: u32) -> f64 {
        let bits = PI * (self.kappa_a as f64 - self.kappa_b as f64);
        let slices = TAU * (self.phi_a as f64 - self.phi_b as f64) / d as f64;
        bits + slices + self.delta_theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub draw: RoundDraw,
    pub pattern: ClickPattern,
    /// Bob's bit is flipped by the extra error channel.
    pub extra_flip: bool,
}

/// Alice's and Bob's final key bits, or None if the round is not kept.
/// Kept rounds are coincidences with phase slices equal or opposite.
pub fn map_round(rec: &RoundRecord, d: u32) -> Option<(u8, u8)> {
    if !rec.pattern.is_coincidence() {
        return None;
    }
    let diff = (rec.draw.phi_a as i64 - rec.draw.phi_b as i64).rem_euclid(d as i64) as u32;
    let opposite = diff == d / 2;
    if diff != 0 && !opposite {
        return None;
    }
    let flips = rec.pattern.is_cross() as u8 ^ opposite as u8 ^ rec.extra_flip as u8;
    Some((rec.draw.kappa_a, rec.draw.kappa_b ^ flips))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiftResult {
    pub valid: u64,
    pub kept: u64,
    pub errors: u64,
    pub qber: f64,
}

/// Sifts retained records and compares the mapped bits.
pub fn sift_and_map(records: &[RoundRecord], d: u32) -> Result<SiftResult> {
    let mut valid = 0;
    let mut kept = 0;
    let mut errors = 0;
    for r in records {
        valid += r.pattern.is_coincidence() as u64;
        if let Some((a, b)) = map_round(r, d) {
            kept += 1;
            errors += (a != b) as u64;
        }
    }
    if kept == 0 {
        return Err(Error::undefined("no rounds survived sifting, qber undefined"));
    }
    Ok(SiftResult { valid, kept, errors, qber: errors as f64 / kept as f64 })
}

/// Counters indexed by [`PairLabel::index`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub n_rounds: [u64; 9],
    pub m_coincidence: [u64; 9],
    pub m_sifted: [u64; 9],
    pub m_error: [u64; 9],
    pub sift_kept: u64,
}

impl Tally {
    pub fn merge(mut self, o: &Tally) -> Tally {
        for i in 0..9 {
            self.n_rounds[i] += o.n_rounds[i];
            self.m_coincidence[i] += o.m_coincidence[i];
            self.m_sifted[i] += o.m_sifted[i];
            self.m_error[i] += o.m_error[i];
        }
        self.sift_kept += o.sift_kept;
        self
    }

    pub fn total_rounds(&self) -> u64 {
        self.n_rounds.iter().sum()
    }

    pub fn total_coincidences(&self) -> u64 {
        self.m_coincidence.iter().sum()
    }

    /// m_error <= m_sifted <= m_coincidence <= n_rounds for every label.
    pub fn is_consistent(&self) -> bool {
        (0..9).all(|i| {
            self.m_error[i] <= self.m_sifted[i]
                && self.m_sifted[i] <= self.m_coincidence[i]
                && self.m_coincidence[i] <= self.n_rounds[i]
        }) && self.sift_kept == self.m_sifted.iter().sum::<u64>()
    }

    fn add_record(&mut self, rec: &RoundRecord, d: u32) {
        let i = rec.draw.pair().index();
        self.n_rounds[i] += 1;
        if rec.pattern.is_coincidence() {
            self.m_coincidence[i] += 1;
        }
        if let Some((a, b)) = map_round(rec, d) {
            self.m_sifted[i] += 1;
            self.sift_kept += 1;
            self.m_error[i] += (a != b) as u64;
        }
    }

    pub fn summary(&self) -> TallySummary {
        let s = PairLabel::SIGNAL.index();
        TallySummary {
            n: self.total_rounds(),
            n_00: self.n_rounds[PairLabel::VACUUM.index()],
            n_nunu: self.n_rounds[PairLabel::DECOY.index()],
            n_mumu: self.n_rounds[s],
            m_00: self.m_coincidence[PairLabel::VACUUM.index()],
            m_nunu: self.m_coincidence[PairLabel::DECOY.index()],
            m_mumu: self.m_coincidence[s],
            raw_key_length: self.m_sifted[s],
            qber: (self.m_sifted[s] > 0).then(|| self.m_error[s] as f64 / self.m_sifted[s] as f64),
        }
    }
}

/// The experiment-table view of a tally. The key is drawn from signal-signal
/// rounds only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TallySummary {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "N_00")]
    pub n_00: u64,
    #[serde(rename = "N_nunu")]
    pub n_nunu: u64,
    #[serde(rename = "N_mumu")]
    pub n_mumu: u64,
    #[serde(rename = "M_00")]
    pub m_00: u64,
    #[serde(rename = "M_nunu")]
    pub m_nunu: u64,
    #[serde(rename = "M_mumu")]
    pub m_mumu: u64,
    pub raw_key_length: u64,
    /// Empty when nothing was sifted.
    pub qber: Option<f64>,
}

pub fn write_summary_csv(path: &Path, rows: &[TallySummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<TallySummary>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedRate {
    pub gain: f64,
    pub gain_sigma: f64,
    /// Error rate among sifted rounds, absent when nothing was sifted.
    pub error: Option<f64>,
    pub error_sigma: Option<f64>,
}

/// Empirical gain and error rate per pair label. Labels never drawn are absent.
pub fn observed_rates(t: &Tally) -> BTreeMap<String, ObservedRate> {
    let mut out = BTreeMap::new();
    for label in PairLabel::all() {
        let i = label.index();
        let n = t.n_rounds[i];
        if n == 0 {
            continue;
        }
        let m = t.m_coincidence[i];
        let (error, error_sigma) = match t.m_sifted[i] {
            0 => (None, None),
            k => (
                Some(t.m_error[i] as f64 / k as f64),
                Some(poisson_sigma(t.m_error[i]) / k as f64),
            ),
        };
        out.insert(
            label.name(),
            ObservedRate {
                gain: m as f64 / n as f64,
                gain_sigma: poisson_sigma(m) / n as f64,
                error,
                error_sigma,
            },
        );
    }
    out
}

/// Flip probability that lifts an intrinsic error rate `intrinsic` to `target`.
pub fn calibrate_extra_error(target: f64, intrinsic: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&intrinsic) || !(intrinsic..=0.5).contains(&target) {
        return Err(Error::invalid(format!(
            "cannot reach error {target} from intrinsic {intrinsic}"
        )));
    }
    Ok((target - intrinsic) / (1.0 - 2.0 * intrinsic))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub links: LinkBudget,
    pub src: SourceModel,
    pub consts: ProtocolConstants,
    pub n_rounds: u64,
    pub seed: u64,
    /// None means no instrument drift.
    pub drift: Option<DriftConfig>,
    pub rounds_per_interval: u64,
    pub cache_resolution: u32,
    /// Keep per-round records for [`sift_and_map`].
    pub retain_records: bool,
}

impl SimConfig {
    pub fn new(links: LinkBudget, src: SourceModel, consts: ProtocolConstants, n_rounds: u64, seed: u64) -> Self {
        SimConfig {
            links,
            src,
            consts,
            n_rounds,
            seed,
            drift: None,
            rounds_per_interval: DEFAULT_ROUNDS_PER_INTERVAL,
            cache_resolution: DEFAULT_CACHE_RESOLUTION,
            retain_records: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.links.validate()?;
        self.src.validate()?;
        self.consts.validate()?;
        if self.n_rounds == 0 {
            return Err(Error::invalid("n_rounds must be at least 1"));
        }
        if self.cache_resolution < 64 {
            return Err(Error::invalid("cache_resolution must be at least 64"));
        }
        if self.rounds_per_interval == 0 {
            return Err(Error::invalid("rounds_per_interval must be positive"));
        }
        if let Some(d) = &self.drift {
            d.validate()?;
        }
        Ok(())
    }
}

/// Exact click distributions per (pair, relative-phase bucket), each computed
/// once on first use. Buckets are centred on multiples of 2 pi / resolution.
pub struct ClickCache<'a> {
    links: &'a LinkBudget,
    src: &'a SourceModel,
    consts: &'a ProtocolConstants,
    resolution: u32,
    slots: Vec<OnceLock<std::result::Result<[f64; 16], String>>>,
}

impl<'a> ClickCache<'a> {
    pub fn new(links: &'a LinkBudget, src: &'a SourceModel, consts: &'a ProtocolConstants, resolution: u32) -> Self {
        let slots = (0..9 * resolution as usize).map(|_| OnceLock::new()).collect();
        ClickCache { links, src, consts, resolution, slots }
    }

    pub fn bucket(&self, rel_phase: f64) -> u32 {
        let r = self.resolution as f64;
        ((rel_phase / TAU * r).round().rem_euclid(r) as u32) % self.resolution
    }

    /// Cumulative click probabilities over the 16 patterns.
    pub fn cdf(&self, pair: PairLabel, bucket: u32) -> Result<&[f64; 16]> {
        let slot = &self.slots[pair.index() * self.resolution as usize + bucket as usize];
        slot.get_or_init(|| {
            let phase = TAU * bucket as f64 / self.resolution as f64;
            oracle::round_clicks(
                pair.a.value(self.consts),
                pair.b.value(self.consts),
                phase,
                self.links,
                self.src,
                DEFAULT_CUTOFF,
            )
            .map(|d| {
                let mut c = [0.0; 16];
                let mut acc = 0.0;
                for (k, p) in d.probs.iter().enumerate() {
                    acc += p;
                    c[k] = acc;
                }
                c
            })
            .map_err(|e| e.to_string())
        })
        .as_ref()
        .map_err(|e| Error::undefined(e.clone()))
    }

    pub fn distribution(&self, pair: PairLabel, bucket: u32) -> Result<ClickDistribution> {
        let c = self.cdf(pair, bucket)?;
        let mut probs = [0.0; 16];
        let mut prev = 0.0;
        for k in 0..16 {
            probs[k] = c[k] - prev;
            prev = c[k];
        }
        Ok(ClickDistribution { probs })
    }
}

fn sample_pattern<R: Rng>(cdf: &[f64; 16], rng: &mut R) -> ClickPattern {
    let u: f64 = rng.random();
    let k = cdf.iter().position(|&c| u < c).unwrap_or(0);
    ClickPattern::from_index(k)
}

fn draw_intensity<R: Rng>(c: &ProtocolConstants, rng: &mut R) -> Intensity {
    let u: f64 = rng.random();
    if u < c.p_mu {
        Intensity::Signal
    } else if u < c.p_mu + c.p_nu {
        Intensity::Decoy
    } else {
        Intensity::Vacuum
    }
}

/// Residuals for at most `max_intervals` intervals.
fn drift_residuals(cfg: &SimConfig, max_intervals: u64) -> Result<Vec<f64>> {
    match &cfg.drift {
        None => Ok(Vec::new()),
        Some(d) => {
            let n = cfg.n_rounds.div_ceil(cfg.rounds_per_interval).min(max_intervals) as usize;
            phase_ref::interval_residuals(d, n, cfg.seed ^ DRIFT_STREAM)
        }
    }
}

fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub tally: Tally,
    /// Empty unless records were requested.
    pub records: Vec<RoundRecord>,
}

/// Per-round simulation. Batches of rounds use independent streams derived
/// from the seed, so the result does not depend on the thread count.
pub fn run_protocol(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let residuals = drift_residuals(cfg, u64::MAX)?;
    let cache = ClickCache::new(&cfg.links, &cfg.src, &cfg.consts, cfg.cache_resolution);
    let d = cfg.consts.d_phases;
    let flip = cfg.links.e_extra;
    let n_batches = cfg.n_rounds.div_ceil(BATCH);

    let batches: Vec<(Tally, Vec<RoundRecord>)> = (0..n_batches)
        .into_par_iter()
        .map(|b| -> Result<(Tally, Vec<RoundRecord>)> {
            let mut rng = batch_rng(cfg.seed, b);
            let start = b * BATCH;
            let end = (start + BATCH).min(cfg.n_rounds);
            let mut tally = Tally::default();
            let mut records = Vec::new();
            for r in start..end {
                let draw = RoundDraw {
                    intensity_a: draw_intensity(&cfg.consts, &mut rng),
                    intensity_b: draw_intensity(&cfg.consts, &mut rng),
                    kappa_a: rng.random_range(0..2),
                    kappa_b: rng.random_range(0..2),
                    phi_a: rng.random_range(0..d) as u16,
                    phi_b: rng.random_range(0..d) as u16,
                    delta_theta: residuals
                        .get((r / cfg.rounds_per_interval) as usize)
                        .copied()
                        .unwrap_or(0.0),
                };
                let cdf = cache.cdf(draw.pair(), cache.bucket(draw.relative_phase(d)))?;
                let pattern = sample_pattern(cdf, &mut rng);
                let extra_flip = flip > 0.0 && rng.random::<f64>() < flip;
                let rec = RoundRecord { draw, pattern, extra_flip };
                tally.add_record(&rec, d);
                if cfg.retain_records {
                    records.push(rec);
                }
            }
            Ok((tally, records))
        })
        .collect::<Result<_>>()?;

    let mut out = SimOutput::default();
    for (t, recs) in batches {
        out.tally = out.tally.merge(&t);
        out.records.extend(recs);
    }
    Ok(out)
}

/// Splits `n` over `probs` (summing to 1) by sequential binomials.
pub fn multinomial<R: Rng>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() {
            out[k] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let x = Binomial::new(left, q).map(|b| b.sample(rng)).unwrap_or(0);
        out[k] = x;
        left -= x;
        mass -= p;
    }
    out
}

fn binomial<R: Rng>(n: u64, p: f64, rng: &mut R) -> u64 {
    Binomial::new(n, p.clamp(0.0, 1.0)).map(|b| b.sample(rng)).unwrap_or(0)
}

/// Same statistics as [`run_protocol`] without visiting rounds: round counts
/// are split multinomially over (pair, bit relation, slice difference, drift
/// bucket) classes and each class over the sixteen click patterns. Suited to
/// experiment-scale round numbers. Records are never retained.
pub fn run_protocol_aggregate(cfg: &SimConfig) -> Result<Tally> {
    cfg.validate()?;
    let residuals = drift_residuals(cfg, MAX_DRIFT_INTERVALS)?;
    let cache = ClickCache::new(&cfg.links, &cfg.src, &cfg.consts, cfg.cache_resolution);
    let d = cfg.consts.d_phases;
    let res = cfg.cache_resolution;

    // Rounds per drift bucket. Beyond MAX_DRIFT_INTERVALS the residual
    // distribution is sampled and rounds are spread over it multinomially;
    // the residual process is stationary, so this only drops the ordering.
    let mut drift_rounds: BTreeMap<u32, u64> = BTreeMap::new();
    if residuals.is_empty() {
        drift_rounds.insert(0, cfg.n_rounds);
    } else if cfg.n_rounds <= residuals.len() as u64 * cfg.rounds_per_interval {
        for (k, &r) in residuals.iter().enumerate() {
            let start = k as u64 * cfg.rounds_per_interval;
            let n = (start + cfg.rounds_per_interval).min(cfg.n_rounds) - start;
            *drift_rounds.entry(cache.bucket(r)).or_default() += n;
        }
    } else {
        let mut hist: BTreeMap<u32, u64> = BTreeMap::new();
        for &r in &residuals {
            *hist.entry(cache.bucket(r)).or_default() += 1;
        }
        let probs: Vec<f64> = hist.values().map(|&c| c as f64 / residuals.len() as f64).collect();
        let counts = multinomial(cfg.n_rounds, &probs, &mut batch_rng(cfg.seed ^ DRIFT_STREAM, u64::MAX));
        for (&b, n) in hist.keys().zip(counts) {
            drift_rounds.insert(b, n);
        }
    }

    let c = &cfg.consts;
    let p_int = [1.0 - c.p_mu - c.p_nu, c.p_nu, c.p_mu];
    let pair_probs: Vec<f64> = PairLabel::all().map(|l| p_int[l.a as usize] * p_int[l.b as usize]).collect();
    // Bit relation x and slice difference s are uniform and independent.
    let classes = 2 * d as usize;
    let class_probs = vec![1.0 / classes as f64; classes];

    let jobs: Vec<(usize, u32, u64)> = drift_rounds.into_iter().enumerate().map(|(i, (b, n))| (i, b, n)).collect();
    let tallies: Vec<Tally> = jobs
        .into_par_iter()
        .map(|(job, drift_bucket, n)| -> Result<Tally> {
            let mut rng = batch_rng(cfg.seed, job as u64);
            let mut t = Tally::default();
            let per_pair = multinomial(n, &pair_probs, &mut rng);
            for (pi, &np) in per_pair.iter().enumerate() {
                let pair = PairLabel::from_index(pi);
                t.n_rounds[pi] += np;
                let per_class = multinomial(np, &class_probs, &mut rng);
                for (ci, &nc) in per_class.iter().enumerate() {
                    if nc == 0 {
                        continue;
                    }
                    let x = (ci as u32) / d;
                    let s = (ci as u32) % d;
                    let phase = PI * x as f64 + TAU * s as f64 / d as f64;
                    let bucket = (cache.bucket(phase) + drift_bucket) % res;
                    let dist = cache.distribution(pair, bucket)?;
                    let per_pattern = multinomial(nc, &dist.probs, &mut rng);
                    let opposite = s == d / 2;
                    if s != 0 && !opposite {
                        for (k, &m) in per_pattern.iter().enumerate() {
                            if ClickPattern::from_index(k).is_coincidence() {
                                t.m_coincidence[pi] += m;
                            }
                        }
                        continue;
                    }
                    for (k, &m) in per_pattern.iter().enumerate() {
                        let pat = ClickPattern::from_index(k);
                        if !pat.is_coincidence() || m == 0 {
                            continue;
                        }
                        t.m_coincidence[pi] += m;
                        t.m_sifted[pi] += m;
                        t.sift_kept += m;
                        let wrong = (x as u8 ^ pat.is_cross() as u8 ^ opposite as u8) == 1;
                        let flipped = binomial(m, cfg.links.e_extra, &mut rng);
                        t.m_error[pi] += if wrong { m - flipped } else { flipped };
                    }
                }
            }
            Ok(t)
        })
        .collect::<Result<_>>()?;
    Ok(tallies.iter().fold(Tally::default(), |acc, t| acc.merge(t)))
}

/// Counts from repeating one fixed-phase round `n` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPhaseCounts {
    pub rounds: u64,
    pub coincidences: u64,
    pub cross: u64,
}

pub fn simulate_fixed_phase(
    mu_a: f64,
    mu_b: f64,
    rel_phase: f64,
    links: &LinkBudget,
    src: &SourceModel,
    n: u64,
    seed: u64,
) -> Result<FixedPhaseCounts> {
    let dist = oracle::round_clicks(mu_a, mu_b, rel_phase, links, src, DEFAULT_CUTOFF)?;
    let mut rng = batch_rng(seed, 0);
    let counts = multinomial(n, &dist.probs, &mut rng);
    let mut out = FixedPhaseCounts { rounds: n, coincidences: 0, cross: 0 };
    for (k, &m) in counts.iter().enumerate() {
        let p = ClickPattern::from_index(k);
        if p.is_coincidence() {
            out.coincidences += m;
        }
        if p.is_cross() {
            out.cross += m;
        }
    }
    Ok(out)
}
