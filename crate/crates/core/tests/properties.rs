use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rand::SeedableRng;
use relay_qkd::config::RunConfig;
use relay_qkd::interference::{raw_visibility, VisibilityModel};
use relay_qkd::optimizer::{optimize_at_distance, split_links, OptimizerConfig};
use relay_qkd::phase_ref::{estimate_phase, unwrap_near, ReferenceBlock};
use relay_qkd::rates::{binary_entropy, rate_report, LinkBudget, ProtocolConstants, DEFAULT_DARK_PROB};
use relay_qkd::sim::{multinomial, run_protocol, run_protocol_aggregate};
use relay_qkd::source::{predicted_hbt_g2, split_intensity, SourceModel};

fn wrap(x: f64) -> f64 {
    x.rem_euclid(TAU)
}

fn circular_gap(a: f64, b: f64) -> f64 {
    let d = wrap(a - b);
    d.min(TAU - d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulation_is_seed_deterministic_and_consistent(seed in any::<u64>(), rounds in 1_000u64..150_000) {
        let mut cfg = RunConfig::preset("trial_100km").unwrap().sim_config().unwrap();
        cfg.n_rounds = rounds;
        cfg.seed = seed;
        let a = run_protocol(&cfg).unwrap();
        let b = run_protocol(&cfg).unwrap();
        prop_assert_eq!(&a.tally, &b.tally);
        prop_assert!(a.tally.is_consistent());
        prop_assert_eq!(a.tally.total_rounds(), rounds);
    }

    #[test]
    fn aggregate_tally_is_consistent(seed in any::<u64>(), rounds in 1u64..1_000_000_000_000, e_extra in 0.0..0.3f64) {
        let mut cfg = RunConfig::preset("trial_200km").unwrap().sim_config().unwrap();
        cfg.n_rounds = rounds;
        cfg.seed = seed;
        cfg.links.e_extra = e_extra;
        let t = run_protocol_aggregate(&cfg).unwrap();
        prop_assert!(t.is_consistent());
        prop_assert_eq!(t.total_rounds(), rounds);
        prop_assert_eq!(run_protocol_aggregate(&cfg).unwrap(), t);
    }

    #[test]
    fn multinomial_preserves_total(n in 0u64..u32::MAX as u64, seed in any::<u64>(), w in prop::collection::vec(0.0..1.0f64, 1..20)) {
        let s: f64 = w.iter().sum();
        prop_assume!(s > 0.0);
        let p: Vec<f64> = w.iter().map(|x| x / s).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let c = multinomial(n, &p, &mut rng);
        prop_assert_eq!(c.iter().sum::<u64>(), n);
        for (k, &ck) in c.iter().enumerate() {
            prop_assert!(p[k] > 0.0 || ck == 0 || k + 1 == p.len());
        }
    }

    #[test]
    fn unwrap_tracks_sub_pi_drift(start in 0.0..TAU, steps in prop::collection::vec(-3.1..3.1f64, 1..200)) {
        let mut truth = start;
        let mut prior = unwrap_near(wrap(truth), Some(truth));
        for s in steps {
            // Reflect so the walk stays well inside the folded range.
            truth = if (-PI..3.0 * PI).contains(&(truth + s)) { truth + s } else { truth - s };
            let next = unwrap_near(wrap(truth), Some(prior));
            prop_assert!((next - prior).abs() < PI);
            prop_assert!((next - truth).abs() < 1e-9);
            prior = next;
        }
    }

    #[test]
    fn unwrap_stays_in_range(base in -50.0..50.0f64, prior in prop::option::of(-50.0..50.0f64)) {
        let t = unwrap_near(base, prior);
        prop_assert!((-TAU..2.0 * TAU).contains(&t));
        prop_assert!(circular_gap(t, base) < 1e-9);
    }

    #[test]
    fn estimator_recovers_noiseless_phase(a in -10.0..10.0f64, b in -10.0..10.0f64) {
        let mean = ReferenceBlock::expected(a, b, 1e9, [1.0 / 3.0; 3]);
        let est = estimate_phase(&ReferenceBlock::from_expected(mean), None).unwrap();
        prop_assert!(circular_gap(est.theta_unwrapped, a - b) < 1e-6);
        prop_assert!((est.cos.hypot(est.sin) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn split_intensity_round_trip(intensity in 1e-4..1.0f64, g2 in 0.0..0.01f64) {
        let s = split_intensity(intensity, g2).unwrap();
        prop_assert!((s.t_emit + s.nu_leak - intensity).abs() <= 1e-12 * intensity);
        prop_assert!((predicted_hbt_g2(&s).unwrap() - g2).abs() < 1e-4);
    }

    #[test]
    fn raw_visibility_monotone(v_c in 0.5..1.0f64, g2 in 1e-4..0.05f64, sigma in 0.5..2.0f64, t_g in 0.5..3.0f64, r1 in 0.05..100.0f64, r2 in 0.05..100.0f64) {
        let m = VisibilityModel { v_corrected: v_c, g2, sigma_a: sigma, t_g, t_p: 1.0, ratio_qd_over_laser: r1 };
        let cleaner = VisibilityModel { g2: g2 / 2.0, ..m };
        prop_assert!(raw_visibility(&cleaner) > raw_visibility(&m));

        let opt = m.optimal_ratio();
        let at = |r: f64| raw_visibility(&VisibilityModel { ratio_qd_over_laser: r, ..m });
        let (near, far) = if (r1 / opt).ln().abs() < (r2 / opt).ln().abs() { (r1, r2) } else { (r2, r1) };
        // Same side of the optimum: further away is worse.
        if (near - opt) * (far - opt) > 0.0 {
            prop_assert!(at(near) >= at(far));
        }
        prop_assert!(at(opt) >= at(r1) && at(opt) >= at(r2));
    }

    #[test]
    fn entropy_is_symmetric(x in 0.0..=1.0f64) {
        let h = binary_entropy(x).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert!((h - binary_entropy(1.0 - x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rate_non_increasing_in_extra_error(km in 0.0..600.0f64, split in 0.05..0.95f64, mu in 1e-4..0.05f64, e1 in 0.0..0.2f64, e2 in 0.0..0.2f64) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let template = LinkBudget::symmetric(1.0, 1.0, 0.52, DEFAULT_DARK_PROB, 0.0);
        let src = SourceModel::from_emission(0.3, 0.002).unwrap();
        let consts = ProtocolConstants { mu, nu: mu / 2.0, ..Default::default() };
        let rate = |e: f64| {
            let links = LinkBudget { e_extra: e, ..split_links(km, split, &template, 0.1954) };
            rate_report(&links, &src, &consts).unwrap().rate_per_pulse
        };
        prop_assert!(rate(lo) >= rate(hi));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn optimizer_beats_grid(km in 0.0..500.0f64, e_extra in 0.0..0.08f64) {
        let template = LinkBudget::symmetric(1.0, 1.0, 0.52, DEFAULT_DARK_PROB, e_extra);
        let src = SourceModel::from_emission(0.3, 0.0015).unwrap();
        let consts = ProtocolConstants::default();
        let cfg = OptimizerConfig::default();
        let free = optimize_at_distance(km, &template, &src, &consts, true, &cfg).unwrap();
        let fixed = optimize_at_distance(km, &template, &src, &consts, false, &cfg).unwrap();
        prop_assert!(free.best.rate >= fixed.best.rate);
        prop_assert!(free.trace.windows(2).all(|w| w[1].rate >= w[0].rate));

        let mut grid_best = 0.0f64;
        for i in 0..12 {
            let mu = (cfg.mu_bounds.0.ln() + (cfg.mu_bounds.1.ln() - cfg.mu_bounds.0.ln()) * i as f64 / 11.0).exp();
            for j in 0..12 {
                let split = cfg.split_bounds.0 + (cfg.split_bounds.1 - cfg.split_bounds.0) * j as f64 / 11.0;
                let links = split_links(km, split, &template, cfg.attenuation_db_per_km);
                let p = ProtocolConstants { mu, nu: mu * cfg.nu_ratio, ..consts };
                if let Ok(r) = rate_report(&links, &src, &p) {
                    grid_best = grid_best.max(r.rate_per_pulse);
                }
            }
        }
        prop_assert!(free.best.rate >= grid_best, "{} < {}", free.best.rate, grid_best);
    }
}
