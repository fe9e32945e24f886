//! Sparse photon-number-basis states and the exact optics oracle.
//!
//! Occupations are packed four bits per mode into a `u64`, so a state holds at
//! most 16 modes with at most 15 photons each. Terms are kept sorted by packed
//! key, which makes every operation deterministic.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CUTOFF: u8 = 4;
pub const PRUNE_THRESHOLD: f64 = 1e-12;
const MAX_MODES: usize = 16;
const MAX_CUTOFF: u8 = 15;
const BITS: u32 = 4;

/// Optical path labels. `Env(k)` are loss modes, appended in order of creation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeLabel {
    A1,
    B1,
    A2,
    B2,
    A3,
    A4,
    B3,
    B4,
    Env(u16),
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::Env(k) => write!(f, "ENV_{k}"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// Where the beam splitter puts its minus sign.
///
/// With inputs `(i, j)` and outputs written back into the same slots:
/// `Second`: a_i -> sqrt(t) a_i + sqrt(r) a_j,  a_j -> sqrt(r) a_i - sqrt(t) a_j
/// `First`:  a_i -> sqrt(t) a_i - sqrt(r) a_j,  a_j -> sqrt(r) a_i + sqrt(t) a_j
///
/// Node A uses `Second` and node B uses `First`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinusOn {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    modes: Vec<ModeLabel>,
    cutoff: u8,
    terms: Vec<(u64, Complex64)>,
}

fn get_occ(key: u64, slot: usize) -> u8 {
    ((key >> (BITS * slot as u32)) & 0xF) as u8
}

fn set_occ(key: u64, slot: usize, n: u8) -> u64 {
    let shift = BITS * slot as u32;
    (key & !(0xF << shift)) | ((n as u64) << shift)
}

fn factorials() -> [f64; 32] {
    let mut f = [1.0; 32];
    for n in 1..32 {
        f[n] = f[n - 1] * n as f64;
    }
    f
}

fn binomial(n: usize, k: usize, fact: &[f64; 32]) -> f64 {
    fact[n] / (fact[k] * fact[n - k])
}

fn check_cutoff(cutoff: u8) -> Result<()> {
    if cutoff == 0 || cutoff > MAX_CUTOFF {
        return Err(Error::invalid(format!(
            "cutoff must be in 1..={MAX_CUTOFF}, got {cutoff}"
        )));
    }
    Ok(())
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("{name} must be in [0, 1], got {p}")));
    }
    Ok(())
}

impl FockVector {
    pub fn vacuum(modes: &[ModeLabel], cutoff: u8) -> Result<Self> {
        check_cutoff(cutoff)?;
        let v = FockVector {
            modes: Vec::new(),
            cutoff,
            terms: vec![(0, Complex64::new(1.0, 0.0))],
        };
        modes.iter().try_fold(v, |acc, &m| acc.with_vacuum_mode(m))
    }

    /// Builds a state from explicit occupation terms. Mostly useful in tests.
    pub fn from_terms(
        modes: &[ModeLabel],
        cutoff: u8,
        terms: &[(Vec<u8>, Complex64)],
    ) -> Result<Self> {
        let mut v = FockVector::vacuum(modes, cutoff)?;
        let mut packed = Vec::with_capacity(terms.len());
        for (occ, amp) in terms {
            if occ.len() != modes.len() {
                return Err(Error::invalid("occupation length does not match modes"));
            }
            let mut key = 0;
            for (slot, &n) in occ.iter().enumerate() {
                if n > cutoff {
                    return Err(Error::invalid(format!("occupation {n} exceeds cutoff")));
                }
                key = set_occ(key, slot, n);
            }
            packed.push((key, *amp));
        }
        v.terms = packed;
        v.normalize_terms();
        Ok(v)
    }

    fn with_vacuum_mode(mut self, m: ModeLabel) -> Result<Self> {
        if self.modes.contains(&m) {
            return Err(Error::invalid(format!("duplicate mode {m}")));
        }
        if self.modes.len() == MAX_MODES {
            return Err(Error::invalid("too many modes"));
        }
        self.modes.push(m);
        Ok(self)
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.modes
    }

    pub fn cutoff(&self) -> u8 {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    fn slot(&self, m: ModeLabel) -> Result<usize> {
        self.modes
            .iter()
            .position(|&x| x == m)
            .ok_or_else(|| Error::invalid(format!("mode {m} not present")))
    }

    /// Iterates over (occupations in mode order, amplitude).
    pub fn iter(&self) -> impl Iterator<Item = (Vec<u8>, Complex64)> + '_ {
        let n = self.modes.len();
        self.terms
            .iter()
            .map(move |&(k, a)| ((0..n).map(|s| get_occ(k, s)).collect(), a))
    }

    /// Amplitude of a basis state given as occupations in mode order.
    pub fn amplitude(&self, occ: &[u8]) -> Complex64 {
        let mut key = 0;
        for (slot, &n) in occ.iter().enumerate() {
            key = set_occ(key, slot, n);
        }
        match self.terms.binary_search_by_key(&key, |t| t.0) {
            Ok(i) => self.terms[i].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Photon-number distribution of one mode, with every other mode traced out.
    pub fn marginal(&self, m: ModeLabel) -> Result<Vec<f64>> {
        let s = self.slot(m)?;
        let mut p = vec![0.0; self.cutoff as usize + 1];
        for &(k, a) in &self.terms {
            p[get_occ(k, s) as usize] += a.norm_sqr();
        }
        Ok(p)
    }

    /// |<self|other>|^2. Both states must list the same modes in the same order.
    pub fn fidelity(&self, other: &FockVector) -> Result<f64> {
        if self.modes != other.modes {
            return Err(Error::invalid("fidelity needs identical mode lists"));
        }
        let mut overlap = Complex64::new(0.0, 0.0);
        for &(k, a) in &self.terms {
            if let Ok(i) = other.terms.binary_search_by_key(&k, |t| t.0) {
                overlap += a.conj() * other.terms[i].1;
            }
        }
        Ok(overlap.norm_sqr())
    }

    pub fn tensor(&self, other: &FockVector) -> Result<FockVector> {
        if self.modes.iter().any(|m| other.modes.contains(m)) {
            return Err(Error::invalid("tensor product of overlapping mode sets"));
        }
        if self.modes.len() + other.modes.len() > MAX_MODES {
            return Err(Error::invalid("too many modes"));
        }
        let shift = BITS * self.modes.len() as u32;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(k1, a1) in &self.terms {
            for &(k2, a2) in &other.terms {
                terms.push((k1 | (k2 << shift), a1 * a2));
            }
        }
        let mut modes = self.modes.clone();
        modes.extend_from_slice(&other.modes);
        let mut out = FockVector {
            modes,
            cutoff: self.cutoff.max(other.cutoff),
            terms,
        };
        out.normalize_terms();
        Ok(out)
    }

    pub fn relabel(&self, from: ModeLabel, to: ModeLabel) -> Result<FockVector> {
        let s = self.slot(from)?;
        if from != to && self.modes.contains(&to) {
            return Err(Error::invalid(format!("mode {to} already present")));
        }
        let mut out = self.clone();
        out.modes[s] = to;
        Ok(out)
    }

    pub fn apply_beam_splitter(
        &self,
        i: ModeLabel,
        j: ModeLabel,
        transmittance: f64,
        sign: MinusOn,
    ) -> Result<FockVector> {
        check_prob("transmittance", transmittance)?;
        if i == j {
            return Err(Error::invalid("beam splitter needs two distinct modes"));
        }
        let si = self.slot(i)?;
        let sj = self.slot(j)?;
        let st = transmittance.sqrt();
        let sr = (1.0 - transmittance).sqrt();
        // Creation-operator images: a_i -> u[0][0] a_i + u[0][1] a_j, a_j -> u[1][0] a_i + u[1][1] a_j
        let u = match sign {
            MinusOn::Second => [[st, sr], [sr, -st]],
            MinusOn::First => [[st, -sr], [sr, st]],
        };
        let fact = factorials();
        let cutoff = self.cutoff as usize;
        let mut terms = Vec::with_capacity(self.terms.len() * 3);
        for &(key, amp) in &self.terms {
            let ni = get_occ(key, si) as usize;
            let nj = get_occ(key, sj) as usize;
            if ni == 0 && nj == 0 {
                terms.push((key, amp));
                continue;
            }
            let base = set_occ(set_occ(key, si, 0), sj, 0);
            let inv_norm = 1.0 / (fact[ni] * fact[nj]).sqrt();
            for k in 0..=ni {
                let ck = binomial(ni, k, &fact)
                    * u[0][0].powi(k as i32)
                    * u[0][1].powi((ni - k) as i32);
                if ck == 0.0 {
                    continue;
                }
                for l in 0..=nj {
                    let p = k + l;
                    let q = ni + nj - p;
                    if p > cutoff || q > cutoff {
                        continue;
                    }
                    let c = ck
                        * binomial(nj, l, &fact)
                        * u[1][0].powi(l as i32)
                        * u[1][1].powi((nj - l) as i32);
                    if c == 0.0 {
                        continue;
                    }
                    let w = c * (fact[p] * fact[q]).sqrt() * inv_norm;
                    let out = set_occ(set_occ(base, si, p as u8), sj, q as u8);
                    terms.push((out, amp * w));
                }
            }
        }
        let mut out = FockVector {
            modes: self.modes.clone(),
            cutoff: self.cutoff,
            terms,
        };
        out.normalize_terms();
        Ok(out)
    }

    /// Transmits mode `m` with probability `eta`; lost photons go to a new ENV mode.
    pub fn apply_loss(&self, m: ModeLabel, eta: f64) -> Result<FockVector> {
        check_prob("eta", eta)?;
        self.slot(m)?;
        let next_env = self
            .modes
            .iter()
            .filter(|x| matches!(x, ModeLabel::Env(_)))
            .count() as u16;
        let env = ModeLabel::Env(next_env);
        let widened = self.clone().with_vacuum_mode(env)?;
        widened.apply_beam_splitter(m, env, eta, MinusOn::Second)
    }

    /// Threshold-detector click statistics on A3, A4, B3, B4. Each detector
    /// registers n photons with probability 1-(1-det_eff)^n and independently
    /// fires on noise with probability `noise`.
    pub fn click_distribution(&self, det_eff: f64, noise: f64) -> Result<ClickDistribution> {
        check_prob("det_eff", det_eff)?;
        check_prob("noise", noise)?;
        let slots = [
            self.slot(ModeLabel::A3)?,
            self.slot(ModeLabel::A4)?,
            self.slot(ModeLabel::B3)?,
            self.slot(ModeLabel::B4)?,
        ];
        let mut by_occ: HashMap<[u8; 4], f64> = HashMap::new();
        for &(k, a) in &self.terms {
            let occ = slots.map(|s| get_occ(k, s));
            *by_occ.entry(occ).or_insert(0.0) += a.norm_sqr();
        }
        // Sort so the summation order does not depend on hashing.
        let mut groups: Vec<_> = by_occ.into_iter().collect();
        groups.sort_unstable_by_key(|g| g.0);
        let mut probs = [0.0; 16];
        for (occ, w) in groups {
            let silent = occ.map(|n| (1.0 - det_eff).powi(n as i32) * (1.0 - noise));
            for (idx, p) in probs.iter_mut().enumerate() {
                let mut v = w;
                for (d, q) in silent.iter().enumerate() {
                    v *= if idx >> d & 1 == 1 { 1.0 - q } else { *q };
                }
                *p += v;
            }
        }
        Ok(ClickDistribution { probs })
    }

    fn normalize_terms(&mut self) {
        self.terms.sort_unstable_by_key(|t| t.0);
        let mut merged: Vec<(u64, Complex64)> = Vec::with_capacity(self.terms.len());
        for &(k, a) in &self.terms {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += a,
                _ => merged.push((k, a)),
            }
        }
        merged.retain(|t| t.1.norm() >= PRUNE_THRESHOLD);
        self.terms = merged;
    }
}

/// Truncated coherent state on a single mode.
pub fn make_coherent(mode: ModeLabel, amplitude: Complex64, cutoff: u8) -> Result<FockVector> {
    check_cutoff(cutoff)?;
    let fact = factorials();
    let pref = (-amplitude.norm_sqr() / 2.0).exp();
    let mut terms = Vec::with_capacity(cutoff as usize + 1);
    let mut power = Complex64::new(1.0, 0.0);
    for n in 0..=cutoff {
        terms.push((vec![n], power * (pref / fact[n as usize].sqrt())));
        power *= amplitude;
    }
    FockVector::from_terms(&[mode], cutoff, &terms)
}

/// sqrt(T)(|10> + |01>)/sqrt(2) + sqrt(1-T)|00> on (A2, B2).
pub fn make_split_single_photon(t_emit: f64) -> Result<FockVector> {
    check_prob("t_emit", t_emit)?;
    let half = Complex64::new((t_emit / 2.0).sqrt(), 0.0);
    FockVector::from_terms(
        &[ModeLabel::A2, ModeLabel::B2],
        DEFAULT_CUTOFF,
        &[
            (vec![0, 0], Complex64::new((1.0 - t_emit).sqrt(), 0.0)),
            (vec![1, 0], half),
            (vec![0, 1], half),
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClickPattern {
    pub la: bool,
    pub ra: bool,
    pub lb: bool,
    pub rb: bool,
}

impl ClickPattern {
    pub fn from_index(i: usize) -> Self {
        ClickPattern {
            la: i & 1 != 0,
            ra: i & 2 != 0,
            lb: i & 4 != 0,
            rb: i & 8 != 0,
        }
    }

    pub fn index(self) -> usize {
        self.la as usize | (self.ra as usize) << 1 | (self.lb as usize) << 2 | (self.rb as usize) << 3
    }

    /// Exactly one click at each node.
    pub fn is_coincidence(self) -> bool {
        self.la != self.ra && self.lb != self.rb
    }

    /// Coincidence where the nodes announce different sides (L at one, R at the other).
    pub fn is_cross(self) -> bool {
        self.is_coincidence() && self.la != self.lb
    }
}

/// Probabilities of the 16 click patterns, indexed by [`ClickPattern::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickDistribution {
    pub probs: [f64; 16],
}

impl ClickDistribution {
    pub fn get(&self, p: ClickPattern) -> f64 {
        self.probs[p.index()]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn coincidence(&self) -> f64 {
        self.sum_where(ClickPattern::is_coincidence)
    }

    pub fn cross_coincidence(&self) -> f64 {
        self.sum_where(ClickPattern::is_cross)
    }

    pub fn sum_where(&self, pred: impl Fn(ClickPattern) -> bool) -> f64 {
        (0..16)
            .filter(|&i| pred(ClickPattern::from_index(i)))
            .map(|i| self.probs[i])
            .sum()
    }

    /// Adds an independent per-detector noise click with probability `p`.
    pub fn with_noise(&self, p: f64) -> ClickDistribution {
        let mut out = [0.0; 16];
        for (src, &w) in self.probs.iter().enumerate() {
            for (dst, o) in out.iter_mut().enumerate() {
                if dst & src != src {
                    continue;
                }
                let mut v = w;
                for d in 0..4 {
                    if src >> d & 1 == 0 {
                        v *= if dst >> d & 1 == 1 { p } else { 1.0 - p };
                    }
                }
                *o += v;
            }
        }
        ClickDistribution { probs: out }
    }
}

/// Everything needed to build the relay state just before detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNodeSetup {
    /// Alice's coherent amplitude, phase included.
    pub alpha: Complex64,
    /// Bob's coherent amplitude, phase included.
    pub beta: Complex64,
    pub t_emit: f64,
    /// Alice->A, source->A, source->B, Bob->B.
    pub eta: [f64; 4],
    pub cutoff: u8,
}

/// Coherent pulses on A1/B1 and the split photon on A2/B2, through the four
/// lossy paths and both node beam splitters. Outputs land on A3, A4, B3, B4.
pub fn five_node_state(s: &FiveNodeSetup) -> Result<FockVector> {
    use ModeLabel::*;
    let state = make_coherent(A1, s.alpha, s.cutoff)?
        .tensor(&make_coherent(B1, s.beta, s.cutoff)?)?
        .tensor(&make_split_single_photon(s.t_emit)?)?;
    let state = state
        .apply_loss(A1, s.eta[0])?
        .apply_loss(A2, s.eta[1])?
        .apply_loss(B2, s.eta[2])?
        .apply_loss(B1, s.eta[3])?;
    state
        .apply_beam_splitter(A1, A2, 0.5, MinusOn::Second)?
        .relabel(A1, A3)?
        .relabel(A2, A4)?
        .apply_beam_splitter(B1, B2, 0.5, MinusOn::First)?
        .relabel(B1, B3)?
        .relabel(B2, B4)
}
