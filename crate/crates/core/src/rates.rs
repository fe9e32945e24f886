//! Closed-form yields, gains, error rates and key rates.
//!
//! `mu` and `nu` are per-user intensities throughout. The photon-number
//! decomposition of the gain is in the total intensity 2*mu seen by the relay,
//! which is what [`rate_report`] passes to [`phase_error_bound`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::SourceModel;

/// Dark-count probability per detection window used by default.
pub const DEFAULT_DARK_PROB: f64 = 2.78e-8;
pub const DEFAULT_F_EC: f64 = 1.15;
pub const DEFAULT_PHASES: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Alice -> node A.
    pub eta1: f64,
    /// Source -> node A.
    pub eta2: f64,
    /// Source -> node B.
    pub eta3: f64,
    /// Bob -> node B.
    pub eta4: f64,
    pub eta_d: f64,
    pub p_d: f64,
    pub e_extra: f64,
    /// Multiply every path by eta_d in the closed forms.
    #[serde(default = "default_true")]
    pub fold_detector: bool,
}

fn default_true() -> bool {
    true
}

impl LinkBudget {
    pub fn symmetric(eta_user: f64, eta_source: f64, eta_d: f64, p_d: f64, e_extra: f64) -> Self {
        LinkBudget {
            eta1: eta_user,
            eta2: eta_source,
            eta3: eta_source,
            eta4: eta_user,
            eta_d,
            p_d,
            e_extra,
            fold_detector: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta1", self.eta1),
            ("eta2", self.eta2),
            ("eta3", self.eta3),
            ("eta4", self.eta4),
            ("eta_d", self.eta_d),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if !(0.0..=1e-3).contains(&self.p_d) {
            return Err(Error::invalid(format!("p_d must be in [0, 1e-3], got {}", self.p_d)));
        }
        if !(0.0..=0.5).contains(&self.e_extra) {
            return Err(Error::invalid(format!(
                "e_extra must be in [0, 0.5], got {}",
                self.e_extra
            )));
        }
        Ok(())
    }

    /// Path transmittances as seen by the closed forms.
    pub fn effective(&self) -> [f64; 4] {
        let k = if self.fold_detector { self.eta_d } else { 1.0 };
        [self.eta1 * k, self.eta2 * k, self.eta3 * k, self.eta4 * k]
    }

    fn symmetric_effective(&self) -> Result<(f64, f64)> {
        let e = self.effective();
        if (e[0] - e[3]).abs() > 1e-12 || (e[1] - e[2]).abs() > 1e-12 {
            return Err(Error::invalid(
                "yield and gain formulas need eta1 = eta4 and eta2 = eta3",
            ));
        }
        Ok((e[0], e[1]))
    }
}

/// Dark-count probability per window from a count rate and the window rate.
pub fn dark_probability(dark_rate_hz: f64, window_rate_hz: f64) -> Result<f64> {
    if dark_rate_hz < 0.0 || window_rate_hz <= 0.0 {
        return Err(Error::invalid("rates must be positive"));
    }
    Ok(dark_rate_hz / window_rate_hz)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConstants {
    pub d_phases: u32,
    pub f_ec: f64,
    pub mu: f64,
    pub nu: f64,
    pub p_mu: f64,
    pub p_nu: f64,
}

impl Default for ProtocolConstants {
    fn default() -> Self {
        ProtocolConstants {
            d_phases: DEFAULT_PHASES,
            f_ec: DEFAULT_F_EC,
            mu: 0.00199,
            nu: 0.00080,
            p_mu: 0.751,
            p_nu: 0.160,
        }
    }
}

impl ProtocolConstants {
    pub fn validate(&self) -> Result<()> {
        if self.d_phases < 2 || !self.d_phases.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "d_phases must be even and >= 2, got {}",
                self.d_phases
            )));
        }
        if self.f_ec < 1.0 {
            return Err(Error::invalid("f_ec must be >= 1"));
        }
        if !(0.0 < self.nu && self.nu < self.mu) {
            return Err(Error::invalid(format!(
                "need 0 < nu < mu, got nu={} mu={}",
                self.nu, self.mu
            )));
        }
        if self.p_mu < 0.0 || self.p_nu < 0.0 || self.p_mu + self.p_nu > 1.0 {
            return Err(Error::invalid("sending probabilities must be >= 0 and sum to <= 1"));
        }
        Ok(())
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("entropy argument must be in [0, 1], got {x}")));
    }
    Ok(h(x))
}

pub(crate) fn h(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchWeights {
    pub w_match: f64,
    pub w_mismatch: f64,
    pub w_leak: f64,
}

impl BranchWeights {
    /// Error fraction when the matched branch carries the correct outcome.
    pub fn error(&self) -> f64 {
        (self.w_mismatch + self.w_leak) / (self.w_match + self.w_mismatch + 2.0 * self.w_leak)
    }
}

/// Weights of the three orthogonal post-selected branches.
pub fn branch_weights(alpha: Complex64, beta: Complex64, links: &LinkBudget) -> BranchWeights {
    let [e1, e2, e3, e4] = links.effective();
    let a = alpha * (e1 * e3).sqrt();
    let b = beta * (e2 * e4).sqrt();
    BranchWeights {
        w_match: (a + b).norm_sqr(),
        w_mismatch: (a - b).norm_sqr(),
        w_leak: e1 * e4 * (2.0 - e2 - e3) * alpha.norm_sqr() * beta.norm_sqr(),
    }
}

/// Error of matched symmetric pulses coming only from the leak branch.
pub fn symmetric_leak_error(eta1: f64, eta2: f64, mu: f64) -> f64 {
    let x = eta1 * (1.0 - eta2) * mu;
    x / (2.0 * eta2 + x)
}

/// |alpha| that balances both interfering amplitudes for a given |beta|.
pub fn intensity_match(links: &LinkBudget, beta_abs: f64) -> Result<f64> {
    let [e1, e2, e3, e4] = links.effective();
    if e1 * e3 <= 0.0 {
        return Err(Error::invalid("eta1 * eta3 must be positive"));
    }
    Ok(beta_abs * (e2 * e4 / (e1 * e3)).sqrt())
}

/// Probability that exactly one node sees a photon from an ideal single-photon
/// event. Returns the value clamped to [0, 1] and whether the clamp acted.
pub fn pr_sde(eta1: f64, eta2: f64, t_emit: f64) -> (f64, bool) {
    let s = t_emit * eta2;
    let v = eta1 * (1.0 - s) + (1.0 - eta1) * s + 0.5 * eta1 * s;
    (v.clamp(0.0, 1.0), !(0.0..=1.0).contains(&v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub ideal: f64,
    pub dark: f64,
    pub leak: f64,
    pub total: f64,
}

impl Components {
    fn new(ideal: f64, dark: f64, leak: f64) -> Self {
        Components {
            ideal,
            dark,
            leak,
            total: ideal + dark + leak,
        }
    }
}

fn leak_click(eta2: f64, src: &SourceModel) -> f64 {
    1.0 - (-0.5 * eta2 * src.nu_leak).exp()
}

/// Coincidence yield given one photon in total from the users.
pub fn yield_y1(links: &LinkBudget, src: &SourceModel) -> Result<(Components, bool)> {
    let (e1, e2) = links.symmetric_effective()?;
    let (sde, clamped) = pr_sde(e1, e2, src.t_emit);
    Ok((
        Components::new(
            0.5 * src.t_emit * e1 * e2,
            2.0 * links.p_d * sde,
            leak_click(e2, src) * sde,
        ),
        clamped,
    ))
}

/// Probability that exactly one node receives a photon when both users send mu.
pub fn pr_sde_mu(mu: f64, links: &LinkBudget, src: &SourceModel) -> Result<f64> {
    let (e1, e2) = links.symmetric_effective()?;
    let s = src.t_emit * e2;
    let z = (-e1 * mu).exp();
    Ok(z * (1.0 - s) * (1.0 - z) + (1.0 - z * (1.0 - s)) * z)
}

/// Coincidence gain when both users send intensity mu.
pub fn gain_qmu(mu: f64, links: &LinkBudget, src: &SourceModel) -> Result<Components> {
    if mu < 0.0 {
        return Err(Error::invalid("mu must be non-negative"));
    }
    let (e1, e2) = links.symmetric_effective()?;
    let z = (-e1 * mu).exp();
    let ideal = (1.0 - z * (1.0 - src.t_emit * e2)) * (1.0 - z);
    let sde = pr_sde_mu(mu, links, src)?;
    Ok(Components::new(
        ideal,
        2.0 * links.p_d * sde,
        leak_click(e2, src) * sde,
    ))
}

/// Error of the ideal branch with D phase slices. The emission probability
/// enters through T*eta2 and T*eta3, since an unemitted photon only ever adds
/// to the leak branch.
pub fn ideal_error(mu: f64, links: &LinkBudget, src: &SourceModel, d_phases: u32) -> f64 {
    let [_, e2, e3, e4] = links.effective();
    let t = src.t_emit;
    let slice = (PI / (2.0 * d_phases as f64)).cos().powi(2);
    let leak = e4 * (2.0 - t * e2 - t * e3) * mu;
    leak / (4.0 * t * e3 * slice + 2.0 * leak)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub e_ideal: f64,
    /// Error before the extra misalignment term.
    pub e_mu: f64,
    /// min(0.5, e_mu + e_extra).
    pub e_total: f64,
}

pub fn error_emu(
    mu: f64,
    links: &LinkBudget,
    src: &SourceModel,
    consts: &ProtocolConstants,
) -> Result<ErrorRates> {
    let q = gain_qmu(mu, links, src)?;
    if q.total <= 0.0 {
        return Err(Error::undefined("error rate with zero gain"));
    }
    let e_ideal = if q.ideal > 0.0 {
        ideal_error(mu, links, src, consts.d_phases)
    } else {
        0.0
    };
    let e_mu = ((e_ideal * q.ideal + 0.5 * q.dark + 0.5 * q.leak) / q.total).min(0.5);
    Ok(ErrorRates {
        e_ideal,
        e_mu,
        e_total: (e_mu + links.e_extra).min(0.5),
    })
}

/// Single-photon fraction of the gain and the phase-error bound 1 - q1.
/// `mu_total` is the intensity whose Poisson weight multiplies Y1.
pub fn phase_error_bound(y1: f64, q_mu: f64, mu_total: f64) -> Result<(f64, f64)> {
    if q_mu <= 0.0 {
        return Err(Error::undefined("phase error with zero gain"));
    }
    let q1 = (y1 * mu_total * (-mu_total).exp() / q_mu).clamp(0.0, 1.0);
    Ok((q1, 1.0 - q1))
}

/// 1 - h(e_p) - f h(E_z).
pub fn key_rate_per_sifted(e_p: f64, e_z: f64, f: f64) -> f64 {
    1.0 - h(e_p) - f * h(e_z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub mu: f64,
    pub y1_ideal: f64,
    pub y1_dark: f64,
    pub y1_leak: f64,
    pub y1_total: f64,
    pub q_mu_ideal: f64,
    pub q_mu_dark: f64,
    pub q_mu_leak: f64,
    pub q_mu_total: f64,
    pub e_mu_ideal: f64,
    pub e_mu: f64,
    pub e_mu_total: f64,
    pub q1: f64,
    pub e_phase_bound: f64,
    pub rate_per_sifted: f64,
    /// max(0, rate_raw).
    pub rate_per_pulse: f64,
    pub rate_raw: f64,
    pub pr_sde_clamped: bool,
}

/// (2Q/D)(1 - h(e_ph) - f h(E)). The phase error enters h capped at 1/2,
/// where h stops increasing. Returns (clamped, raw).
pub fn key_rate_per_pulse(report: &RateReport, consts: &ProtocolConstants) -> (f64, f64) {
    let raw = 2.0 * report.q_mu_total / consts.d_phases as f64
        * key_rate_per_sifted(report.e_phase_bound.min(0.5), report.e_mu_total, consts.f_ec);
    (raw.max(0.0), raw)
}

/// Every closed-form quantity at signal intensity `consts.mu`.
pub fn rate_report(
    links: &LinkBudget,
    src: &SourceModel,
    consts: &ProtocolConstants,
) -> Result<RateReport> {
    let mu = consts.mu;
    let (y1, clamped) = yield_y1(links, src)?;
    let q = gain_qmu(mu, links, src)?;
    let e = error_emu(mu, links, src, consts)?;
    let (q1, e_ph) = phase_error_bound(y1.total, q.total, 2.0 * mu)?;
    let mut r = RateReport {
        mu,
        y1_ideal: y1.ideal,
        y1_dark: y1.dark,
        y1_leak: y1.leak,
        y1_total: y1.total,
        q_mu_ideal: q.ideal,
        q_mu_dark: q.dark,
        q_mu_leak: q.leak,
        q_mu_total: q.total,
        e_mu_ideal: e.e_ideal,
        e_mu: e.e_mu,
        e_mu_total: e.e_total,
        q1,
        e_phase_bound: e_ph,
        rate_per_sifted: key_rate_per_sifted(e_ph.min(0.5), e.e_total, consts.f_ec),
        rate_per_pulse: 0.0,
        rate_raw: 0.0,
        pr_sde_clamped: clamped,
    };
    let (clamped_rate, raw) = key_rate_per_pulse(&r, consts);
    r.rate_per_pulse = clamped_rate;
    r.rate_raw = raw;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::split_intensity;
    use approx::assert_relative_eq;

    fn table1_100km() -> (LinkBudget, SourceModel, ProtocolConstants) {
        (
            LinkBudget::symmetric(0.325, 0.332, 0.52, DEFAULT_DARK_PROB, 0.0),
            split_intensity(0.05338, 0.0015).unwrap(),
            ProtocolConstants::default(),
        )
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // -0.097 log2 0.097 - 0.903 log2 0.903
        assert_relative_eq!(binary_entropy(0.097).unwrap(), 0.459_41, epsilon = 1e-5);
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn branch_weight_examples() {
        let l = LinkBudget::symmetric(0.3, 0.3, 1.0, 0.0, 0.0);
        let a = Complex64::new(0.04, 0.0);
        assert!(branch_weights(a, a, &l).w_mismatch < 1e-20);
        assert!(branch_weights(a, -a, &l).w_match < 1e-20);

        let l = LinkBudget::symmetric(0.325, 0.332, 1.0, 0.0, 0.0);
        let s = Complex64::new(0.002f64.sqrt(), 0.0);
        let from_weights = branch_weights(s, s, &l).error();
        let closed_form = symmetric_leak_error(0.325, 0.332, 0.002);
        assert_relative_eq!(closed_form, 6.535e-4, max_relative = 1e-3);
        // The two differ only at second order in mu.
        assert_relative_eq!(from_weights, closed_form, max_relative = 1e-3);
    }

    #[test]
    fn intensity_match_examples() {
        let l = LinkBudget::symmetric(0.3, 0.3, 1.0, 0.0, 0.0);
        assert_relative_eq!(intensity_match(&l, 0.1).unwrap(), 0.1);
        let mut half = l;
        half.eta1 = 0.15;
        assert_relative_eq!(intensity_match(&half, 0.1).unwrap(), 0.1 * 2f64.sqrt(), max_relative = 1e-12);
        let asym = LinkBudget { eta1: 0.047, eta2: 0.051, eta3: 0.05, eta4: 0.05, ..l };
        assert_relative_eq!(intensity_match(&asym, 1.0).unwrap(), 1.0417, max_relative = 1e-4);
        let blind = LinkBudget { eta1: 0.0, ..l };
        assert!(intensity_match(&blind, 1.0).is_err());
    }

    #[test]
    fn pr_sde_examples() {
        assert_eq!(pr_sde(0.3, 0.7, 0.0).0, 0.3);
        assert_relative_eq!(pr_sde(0.0, 0.7, 0.5).0, 0.35);
        assert_relative_eq!(pr_sde(0.3, 0.3, 1.0).0, 0.465, epsilon = 1e-15);
    }

    #[test]
    fn yield_examples() {
        let l = LinkBudget::symmetric(1.0, 1.0, 1.0, 0.0, 0.0);
        let (y, _) = yield_y1(&l, &SourceModel::ideal(1.0).unwrap()).unwrap();
        assert_relative_eq!(y.total, 0.5);
        let l = LinkBudget::symmetric(0.2, 0.4, 0.5, 0.0, 0.0);
        let (y, _) = yield_y1(&l, &SourceModel::ideal(0.3).unwrap()).unwrap();
        assert_eq!(y.total, 0.5 * 0.3 * 0.1 * 0.2);
        let mut asym = l;
        asym.eta4 = 0.1;
        assert!(yield_y1(&asym, &SourceModel::ideal(0.3).unwrap()).is_err());
    }

    #[test]
    fn gain_examples() {
        let (l, s, _) = table1_100km();
        let g0 = gain_qmu(0.0, &l, &s).unwrap();
        assert_eq!(g0.ideal, 0.0);
        assert!(g0.total > 0.0);
        let big = gain_qmu(1e4, &l, &s).unwrap();
        assert!(big.ideal <= 1.0 && big.ideal > 0.99);
        let g = gain_qmu(0.00199, &l, &s).unwrap();
        let observed = 16_746_919.0 / 5.41488e12;
        assert!(g.total / observed < 1.5 && observed / g.total < 1.5);
        assert_eq!(g.total, g.ideal + g.dark + g.leak);
    }

    #[test]
    fn error_examples() {
        let l = LinkBudget::symmetric(0.325, 0.332, 0.52, 0.0, 0.0);
        let s = SourceModel::ideal(0.05).unwrap();
        let c = ProtocolConstants::default();
        assert!(error_emu(1e-9, &l, &s, &c).unwrap().e_mu < 1e-7);
        // Users cut off: the photon still fires one side and noise the other.
        let cut = LinkBudget { eta1: 0.0, eta4: 0.0, p_d: 1e-6, ..l };
        assert_eq!(error_emu(0.002, &cut, &s, &c).unwrap().e_mu, 0.5);
        let dark = SourceModel::ideal(0.0).unwrap();
        assert!(error_emu(0.0, &l, &dark, &c).is_err());
    }

    #[test]
    fn slices_scale_by_cos_squared() {
        let (l, s, _) = table1_100km();
        let mu = 0.002;
        let inf = ideal_error(mu, &l, &s, 1 << 20);
        let d16 = ideal_error(mu, &l, &s, 16);
        let c = (PI / 32.0).cos().powi(2);
        let [_, e2, e3, e4] = l.effective();
        let leak = e4 * (2.0 - s.t_emit * (e2 + e3)) * mu;
        assert_relative_eq!(d16, leak / (4.0 * s.t_emit * e3 * c + 2.0 * leak), max_relative = 1e-14);
        assert!(d16 > inf);
        // Unit emission and the symmetric form agree as D grows.
        let t1 = SourceModel::ideal(1.0).unwrap();
        let l1 = LinkBudget::symmetric(0.325, 0.332, 1.0, 0.0, 0.0);
        let limit = ideal_error(mu, &l1, &t1, 1 << 20);
        let x = 0.325 * (1.0 - 0.332) * mu;
        assert!((limit - x / (2.0 * 0.332 + 2.0 * x)).abs() < 1e-6);
    }

    #[test]
    fn phase_bound_examples() {
        let (q1, e) = phase_error_bound(1.0, 0.5 * (-0.5f64).exp(), 0.5).unwrap();
        assert_relative_eq!(q1, 1.0);
        assert!(e.abs() < 1e-15);
        assert_eq!(phase_error_bound(0.0, 1e-6, 0.004).unwrap().1, 1.0);
        assert!(phase_error_bound(0.1, 0.0, 0.1).is_err());
    }

    #[test]
    fn report_at_100km() {
        let (l, s, c) = table1_100km();
        let r = rate_report(&l, &s, &c).unwrap();
        let [e1, e2, ..] = l.effective();
        // Independent recomputation of q1 and the phase bound.
        let y1 = 0.5 * s.t_emit * e1 * e2
            + (2.0 * 2.78e-8 + 1.0 - (-0.5 * e2 * s.nu_leak).exp())
                * (e1 * (1.0 - s.t_emit * e2) + (1.0 - e1) * s.t_emit * e2 + 0.5 * e1 * s.t_emit * e2);
        assert_relative_eq!(r.y1_total, y1, max_relative = 1e-12);
        let q1 = y1 * 2.0 * c.mu * (-2.0 * c.mu).exp() / r.q_mu_total;
        assert_relative_eq!(r.q1, q1, max_relative = 1e-12);
        assert_relative_eq!(r.e_phase_bound, 1.0 - q1, max_relative = 1e-12);
        assert!(r.rate_per_pulse > 0.0);
    }

    #[test]
    fn sifted_rate_examples() {
        assert_eq!(key_rate_per_sifted(0.0, 0.0, 1.0), 1.0);
        assert!(key_rate_per_sifted(0.0, 0.5, 1.15) < 0.0);
        let (l, s, c) = table1_100km();
        let mut r = rate_report(&l, &s, &c).unwrap();
        r.e_phase_bound = 0.0;
        r.e_mu_total = 0.0;
        let c1 = ProtocolConstants { f_ec: 1.0, ..c };
        assert_relative_eq!(key_rate_per_pulse(&r, &c1).0, 2.0 * r.q_mu_total / 16.0);
        r.e_phase_bound = 0.5;
        assert_eq!(key_rate_per_pulse(&r, &c1).0, 0.0);
    }

    #[test]
    fn dark_conversion() {
        assert_relative_eq!(dark_probability(60.0, 200e6).unwrap(), 3e-7);
        assert!(dark_probability(60.0, 0.0).is_err());
    }
}
