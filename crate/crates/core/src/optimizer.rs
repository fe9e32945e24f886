//! Key-rate maximization over the signal intensity and the split of fiber
//! loss between the user spans and the source spans, plus distance scans.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::{rate_report, LinkBudget, ProtocolConstants, RateReport};
use crate::source::SourceModel;

/// Gives eta = 0.325 over 25 km.
pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.1954;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub attenuation_db_per_km: f64,
    pub max_evaluations: usize,
    /// Stop once a full sweep improves the rate by less than this fraction.
    pub rel_tol: f64,
    /// nu is held at this multiple of mu.
    pub nu_ratio: f64,
    pub mu_bounds: (f64, f64),
    pub split_bounds: (f64, f64),
    /// Points in the coarse scan that brackets each line search.
    pub coarse_points: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
            max_evaluations: 200,
            rel_tol: 1e-4,
            nu_ratio: 0.00080 / 0.00199,
            mu_bounds: (1e-6, 0.5),
            split_bounds: (0.01, 0.99),
            coarse_points: 16,
        }
    }
}

/// Path transmittances for `total_km` of fiber with a fraction `split` of the
/// loss on the two user spans. The layout is mirror-symmetric.
pub fn split_links(total_km: f64, split: f64, template: &LinkBudget, attenuation_db_per_km: f64) -> LinkBudget {
    let half_db = attenuation_db_per_km * total_km / 2.0;
    let user = 10f64.powf(-split * half_db / 10.0);
    let source = 10f64.powf(-(1.0 - split) * half_db / 10.0);
    LinkBudget { eta1: user, eta2: source, eta3: source, eta4: user, ..*template }
}

pub fn total_transmittance(total_km: f64, attenuation_db_per_km: f64) -> f64 {
    10f64.powf(-attenuation_db_per_km * total_km / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub total_distance: f64,
    pub loss_split: f64,
    pub eta_total: f64,
    pub params: ProtocolConstants,
    pub rate: f64,
    pub report: Option<RateReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerResult {
    pub best: ScanPoint,
    /// Accepted iterates, each at least as good as the one before.
    pub trace: Vec<ScanPoint>,
    pub evaluations: usize,
    pub diagnostic: Option<String>,
}

struct Objective<'a> {
    total_km: f64,
    template: &'a LinkBudget,
    src: &'a SourceModel,
    consts: &'a ProtocolConstants,
    cfg: &'a OptimizerConfig,
    evaluations: usize,
}

impl Objective<'_> {
    fn point(&mut self, mu: f64, split: f64) -> ScanPoint {
        self.evaluations += 1;
        let links = split_links(self.total_km, split, self.template, self.cfg.attenuation_db_per_km);
        let params = ProtocolConstants { mu, nu: mu * self.cfg.nu_ratio, ..*self.consts };
        let report = rate_report(&links, self.src, &params).ok();
        ScanPoint {
            total_distance: self.total_km,
            loss_split: split,
            eta_total: total_transmittance(self.total_km, self.cfg.attenuation_db_per_km),
            params,
            rate: report.as_ref().map_or(0.0, |r| r.rate_per_pulse.max(0.0)),
            report,
        }
    }

    fn budget_left(&self) -> bool {
        self.evaluations < self.cfg.max_evaluations
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Search state: (ln mu, logit split) and the point evaluated there.
type Iterate = ((f64, f64), ScanPoint);

/// Maximizes along the segment `at(t)`, t in [lo, hi]: a coarse scan picks the
/// best cell, then golden section refines inside its neighbours. Returns the
/// best point seen, never worse than `best`.
fn line_search(
    obj: &mut Objective,
    lo: f64,
    hi: f64,
    coarse: usize,
    tol: f64,
    at: &dyn Fn(f64) -> (f64, f64),
    mut best: Iterate,
) -> Iterate {
    let eval = |obj: &mut Objective, t: f64, best: &mut Iterate| {
        let (x, y) = at(t);
        let p = obj.point(x.exp(), sigmoid(y));
        let r = p.rate;
        if r > best.1.rate {
            *best = ((x, y), p);
        }
        r
    };
    let n = coarse.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let mut grid = Vec::with_capacity(n);
    for k in 0..n {
        if !obj.budget_left() {
            return best;
        }
        grid.push(eval(obj, lo + step * k as f64, &mut best));
    }
    let k = (0..n).fold(0, |bk, i| if grid[i] > grid[bk] { i } else { bk });
    if grid[k] <= 0.0 {
        return best;
    }
    let (mut a, mut b) = (lo + step * k.saturating_sub(1) as f64, (lo + step * (k + 1) as f64).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut rc = eval(obj, c, &mut best);
    let mut rd = eval(obj, d, &mut best);
    while (b - a) > tol && obj.budget_left() {
        if rc >= rd {
            b = d;
            d = c;
            rd = rc;
            c = b - g * (b - a);
            rc = eval(obj, c, &mut best);
        } else {
            a = c;
            c = d;
            rc = rd;
            d = a + g * (b - a);
            rd = eval(obj, d, &mut best);
        }
    }
    best
}

/// Coordinate ascent over ln mu and, if `opt_split`, the logit of the loss
/// split, with a pattern move along each sweep's net displacement to follow
/// the diagonal ridge. The split starts at 0.5 and the first step optimizes
/// mu alone, so a free-split result never falls below the fixed-split one.
pub fn optimize_at_distance(
    total_km: f64,
    template: &LinkBudget,
    src: &SourceModel,
    consts: &ProtocolConstants,
    opt_split: bool,
    cfg: &OptimizerConfig,
) -> Result<OptimizerResult> {
    if total_km.is_nan() || total_km < 0.0 || cfg.attenuation_db_per_km <= 0.0 {
        return Err(Error::invalid("distance must be non-negative and attenuation positive"));
    }
    let (mlo, mhi) = (cfg.mu_bounds.0.ln(), cfg.mu_bounds.1.ln());
    let (slo, shi) = (logit(cfg.split_bounds.0), logit(cfg.split_bounds.1));
    let clamp = move |(x, y): (f64, f64)| (x.clamp(mlo, mhi), y.clamp(slo, shi));
    let mut obj = Objective { total_km, template, src, consts, cfg, evaluations: 0 };
    const TOL: f64 = 1e-3;

    let start_xy = (consts.mu.ln().clamp(mlo, mhi), 0.0);
    let start = obj.point(start_xy.0.exp(), 0.5);
    let mut trace = vec![start.clone()];
    let y0 = start_xy.1;
    let mut best = line_search(&mut obj, mlo, mhi, cfg.coarse_points, TOL, &|x| (x, y0), (start_xy, start));
    trace.push(best.1.clone());

    if opt_split {
        let mut first = true;
        while obj.budget_left() && best.1.rate > 0.0 {
            let before = best.clone();
            let coarse = if first { cfg.coarse_points } else { cfg.coarse_points / 2 };
            let x = best.0 .0;
            best = line_search(&mut obj, slo, shi, coarse, TOL, &|y| (x, y), best);
            let y = best.0 .1;
            best = line_search(&mut obj, mlo, mhi, coarse, TOL, &|x| (x, y), best);
            let (dx, dy) = (best.0 .0 - before.0 .0, best.0 .1 - before.0 .1);
            if dx != 0.0 || dy != 0.0 {
                let origin = best.0;
                best = line_search(&mut obj, 0.0, 4.0, 9, TOL, &|t| clamp((origin.0 + t * dx, origin.1 + t * dy)), best);
            }
            trace.push(best.1.clone());
            first = false;
            if best.1.rate - before.1.rate <= cfg.rel_tol * before.1.rate {
                break;
            }
        }
    }

    let best = best.1;
    let diagnostic = (best.rate <= 0.0).then(|| format!("no positive rate found at {total_km} km"));
    Ok(OptimizerResult { best, trace, evaluations: obj.evaluations, diagnostic })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub e_extra: f64,
    pub opt_split: bool,
    /// Ends before the first distance with zero rate.
    pub points: Vec<ScanPoint>,
}

/// One optimized curve per extra-error level. Distances are evaluated in
/// parallel and reported in input order.
pub fn scan_distance(
    distances_km: &[f64],
    e_extra_levels: &[f64],
    template: &LinkBudget,
    src: &SourceModel,
    consts: &ProtocolConstants,
    opt_split: bool,
    cfg: &OptimizerConfig,
) -> Result<Vec<Curve>> {
    if e_extra_levels.iter().any(|e| !(0.0..=0.5).contains(e)) {
        return Err(Error::invalid("e_extra levels must lie in [0, 0.5]"));
    }
    e_extra_levels
        .iter()
        .map(|&e_extra| {
            let links = LinkBudget { e_extra, ..*template };
            let results: Vec<ScanPoint> = distances_km
                .par_iter()
                .map(|&km| optimize_at_distance(km, &links, src, consts, opt_split, cfg).map(|r| r.best))
                .collect::<Result<_>>()?;
            let points = results.into_iter().take_while(|p| p.rate > 0.0).collect();
            Ok(Curve { e_extra, opt_split, points })
        })
        .collect()
}

/// Least-squares slope of ln(rate) against ln(eta_total) over points with
/// eta_total inside `window` and positive rate.
pub fn fit_scaling_exponent(points: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|(eta, r)| *eta >= window.0 && *eta <= window.1 && *r > 0.0)
        .map(|(eta, r)| (eta.ln(), r.ln()))
        .collect();
    if xy.len() < 5 {
        return Err(Error::undefined(format!("need 5 points in the fit window, have {}", xy.len())));
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xy.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::undefined("fit window holds a single transmittance"));
    }
    Ok(sxy / sxx)
}

/// Zero-rate distance by bisection on the optimized rate, searched in [lo, hi].
/// None if the rate is still positive at `hi`.
pub fn cutoff_distance(
    lo: f64,
    hi: f64,
    template: &LinkBudget,
    src: &SourceModel,
    consts: &ProtocolConstants,
    cfg: &OptimizerConfig,
) -> Result<Option<f64>> {
    let rate = |km: f64| optimize_at_distance(km, template, src, consts, true, cfg).map(|r| r.best.rate);
    if rate(hi)? > 0.0 {
        return Ok(None);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > 1.0 {
        let m = (a + b) / 2.0;
        if rate(m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Some(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub distance_km: f64,
    pub eta_total: f64,
    pub mu: f64,
    pub nu: f64,
    pub split: f64,
    pub rate_bits_per_pulse: f64,
    pub e_mu: f64,
    pub e_ph: f64,
}

impl From<&ScanPoint> for CurveRow {
    fn from(p: &ScanPoint) -> Self {
        CurveRow {
            distance_km: p.total_distance,
            eta_total: p.eta_total,
            mu: p.params.mu,
            nu: p.params.nu,
            split: p.loss_split,
            rate_bits_per_pulse: p.rate,
            e_mu: p.report.as_ref().map_or(f64::NAN, |r| r.e_mu_total),
            e_ph: p.report.as_ref().map_or(f64::NAN, |r| r.e_phase_bound),
        }
    }
}

pub fn write_curve_csv(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
