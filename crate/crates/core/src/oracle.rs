//! The Fock engine applied to the relay: click statistics for given user
//! intensities and relative phase, and checks against the closed forms.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fock::{five_node_state, ClickDistribution, FiveNodeSetup, DEFAULT_CUTOFF};
use crate::rates::{self, LinkBudget};
use crate::source::SourceModel;

/// Per-detector probability of a click not caused by the interfering fields:
/// dark counts OR'd with the leaked coherent light, which reaches each of the
/// four detectors with intensity eta_d * eta2 * nu / 4.
pub fn noise_per_detector(links: &LinkBudget, src: &SourceModel) -> f64 {
    let leak = links.eta_d * links.eta2 * src.nu_leak / 4.0;
    1.0 - (1.0 - links.p_d) * (-leak).exp()
}

/// Exact click statistics for one round. `rel_phase` is Alice's phase minus
/// Bob's, encoded bits and instrument drift included.
pub fn round_clicks(
    mu_a: f64,
    mu_b: f64,
    rel_phase: f64,
    links: &LinkBudget,
    src: &SourceModel,
    cutoff: u8,
) -> Result<ClickDistribution> {
    let setup = FiveNodeSetup {
        alpha: Complex64::from_polar(mu_a.sqrt(), rel_phase),
        beta: Complex64::new(mu_b.sqrt(), 0.0),
        t_emit: src.t_emit,
        eta: [links.eta1, links.eta2, links.eta3, links.eta4],
        cutoff,
    };
    let clean = five_node_state(&setup)?.click_distribution(links.eta_d, 0.0)?;
    Ok(clean.with_noise(noise_per_detector(links, src)))
}

/// Coincidence probability with both users at `mu`, averaged over `n_phases`
/// equally spaced relative phases.
pub fn averaged_coincidence(
    mu: f64,
    links: &LinkBudget,
    src: &SourceModel,
    n_phases: u32,
) -> Result<f64> {
    let mut sum = 0.0;
    for k in 0..n_phases {
        let phase = 2.0 * PI * k as f64 / n_phases as f64;
        sum += round_clicks(mu, mu, phase, links, src, DEFAULT_CUTOFF)?.coincidence();
    }
    Ok(sum / n_phases as f64)
}

/// Coincidence yield with exactly one photon from the users, averaged over
/// which user sent it.
pub fn single_photon_yield(links: &LinkBudget, src: &SourceModel) -> Result<f64> {
    use crate::fock::{make_split_single_photon, FockVector, MinusOn, ModeLabel::*};
    let one = Complex64::new(1.0, 0.0);
    let mut total = 0.0;
    for alice_sends in [true, false] {
        let (na, nb) = if alice_sends { (1, 0) } else { (0, 1) };
        let users = FockVector::from_terms(&[A1, B1], DEFAULT_CUTOFF, &[(vec![na, nb], one)])?;
        let st = users
            .tensor(&make_split_single_photon(src.t_emit)?)?
            .apply_loss(A1, links.eta1)?
            .apply_loss(A2, links.eta2)?
            .apply_loss(B2, links.eta3)?
            .apply_loss(B1, links.eta4)?
            .apply_beam_splitter(A1, A2, 0.5, MinusOn::Second)?
            .relabel(A1, A3)?
            .relabel(A2, A4)?
            .apply_beam_splitter(B1, B2, 0.5, MinusOn::First)?
            .relabel(B1, B3)?
            .relabel(B2, B4)?;
        let d = st
            .click_distribution(links.eta_d, 0.0)?
            .with_noise(noise_per_detector(links, src));
        total += 0.5 * d.coincidence();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainCheck {
    pub mu: f64,
    pub eta_user: f64,
    pub eta_source: f64,
    pub eta_d: f64,
    pub t_emit: f64,
    pub nu_leak: f64,
    pub p_d: f64,
    pub oracle: f64,
    pub analytic: f64,
    pub rel_diff: f64,
}

/// Phase-averaged oracle coincidence against the closed-form gain.
pub fn check_gain(mu: f64, links: &LinkBudget, src: &SourceModel) -> Result<GainCheck> {
    let oracle = averaged_coincidence(mu, links, src, 32)?;
    let analytic = rates::gain_qmu(mu, links, src)?.total;
    Ok(GainCheck {
        mu,
        eta_user: links.eta1,
        eta_source: links.eta2,
        eta_d: links.eta_d,
        t_emit: src.t_emit,
        nu_leak: src.nu_leak,
        p_d: links.p_d,
        oracle,
        analytic,
        rel_diff: (oracle - analytic).abs() / analytic,
    })
}

/// Random weak-pulse settings for spot checks: mu up to 0.01, any
/// transmittance above 1%, modest source impurity and dark counts.
pub fn random_weak_draws(n: usize, seed: u64) -> Result<Vec<(f64, LinkBudget, SourceModel)>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut log_uniform = |lo: f64, hi: f64| (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mu = log_uniform(1e-4, 1e-2);
        let eta_user = log_uniform(0.01, 1.0);
        let eta_source = log_uniform(0.01, 1.0);
        let eta_d = log_uniform(0.3, 1.0);
        let t_emit = log_uniform(0.05, 1.0);
        let g2 = log_uniform(1e-4, 1e-2);
        let p_d = log_uniform(1e-9, 1e-6);
        out.push((
            mu,
            LinkBudget::symmetric(eta_user, eta_source, eta_d, p_d, 0.0),
            SourceModel::from_emission(t_emit, g2)?,
        ));
    }
    Ok(out)
}

/// Gain checks over `draws` random weak-pulse settings.
pub fn gain_suite(draws: usize, seed: u64) -> Result<Vec<GainCheck>> {
    use rayon::prelude::*;
    random_weak_draws(draws, seed)?
        .par_iter()
        .map(|(mu, links, src)| check_gain(*mu, links, src))
        .collect()
}
