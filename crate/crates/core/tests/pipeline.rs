use std::f64::consts::FRAC_PI_2;

use cz_core::engine::ball::{verify_ball_estimate, BallInputs};
use cz_core::engine::corollary::{verify_euclidean_corollaries, CorollaryMode};
use cz_core::engine::global::{verify_global_estimate, GlobalOptions};
use cz_core::engine::search::{extremal_ratio_search, SearchOptions};
use cz_core::fixtures;
use cz_core::harmonic::{derivative_decay_experiment, estimate_harmonic_radius, HarmonicOptions};
use cz_core::{DerivativeMode, Error, Extended};

#[test]
fn affine_maps_have_zero_ratio() {
    let rep = verify_global_estimate(&fixtures::affine_problem(41), &GlobalOptions::default()).unwrap();
    assert_eq!(rep.terms.lhs_hess, 0.0);
    assert_eq!(rep.ratio, 0.0);
    assert!(rep.invariants_hold());
}

#[test]
fn cylinder_hessian_matches_mean_curvature() {
    for p in [1.5, 2.0, 4.0] {
        let opts = GlobalOptions { p, ..GlobalOptions::default() };
        let rep = verify_global_estimate(&fixtures::cylinder_problem(33, DerivativeMode::Analytic), &opts);
        // 32 cells put r̂ = 1/16 exactly on the grid step
        assert!(matches!(rep, Err(Error::ResolutionTooCoarse { .. })));
        let rep = verify_global_estimate(&fixtures::cylinder_problem(41, DerivativeMode::Analytic), &opts).unwrap();
        assert!((rep.terms.lhs_hess - rep.terms.t_laplacian).abs() < 1e-10 * rep.terms.lhs_hess);
        assert_eq!(rep.terms.t_du_2p_sq, 0.0);
        assert!(rep.invariants_hold());
    }
}

#[test]
fn bad_exponents_are_rejected() {
    let opts = GlobalOptions { p: 1.0, ..GlobalOptions::default() };
    let err = verify_global_estimate(&fixtures::affine_problem(41), &opts).unwrap_err();
    assert!(matches!(err, Error::UnsupportedExponent(_)));
}

#[test]
fn understated_lipschitz_bounds_are_caught() {
    let mut problem = fixtures::graph_problem(0.5, 41, DerivativeMode::Analytic);
    problem.map.lipschitz = Extended::Finite(1.0);
    let err = verify_global_estimate(&problem, &GlobalOptions::default()).unwrap_err();
    assert!(matches!(err, Error::LipschitzViolation { .. }), "{err}");
}

#[test]
fn ball_estimate_needs_target_radius_certificate() {
    let map = fixtures::sphere_immersion(1.0, 33, DerivativeMode::Analytic);
    let inputs = BallInputs {
        map: &map,
        x: vec![FRAC_PI_2, 0.0],
        y: vec![0.0, 0.0, 0.0],
        r: 0.15,
        big_r: 1.5,
        p: 2.0,
        source_radius: Some(Extended::Finite(0.3)),
        target_radius: None,
    };
    assert!(matches!(verify_ball_estimate(&inputs), Err(Error::CertificateRequired(_))));
    let inputs = BallInputs { target_radius: Some(Extended::Infinite), ..inputs };
    let est = verify_ball_estimate(&inputs).unwrap();
    assert!(est.ratio.is_finite() && est.ratio > 0.0);
}

#[test]
fn corollary_mode_reports_every_term() {
    let map = fixtures::sphere_immersion(1.0, 33, DerivativeMode::Analytic);
    let rep =
        verify_euclidean_corollaries(&map, 2.0, CorollaryMode::CorollaryA, Extended::Finite(0.3), Extended::Infinite)
            .unwrap();
    assert_eq!(rep.r, Some(0.3));
    let diam = rep.diameter.unwrap();
    // chord between opposite corners of the window
    assert!(diam > 0.9 && diam < 1.2, "{diam}");
    assert!(rep.isometry_defect < 1e-12 && rep.energy_defect < 1e-12);
    let expected = rep.h_norm + rep.volume.sqrt() * (1.0 / 0.3 + diam / 0.09);
    assert!((rep.rhs - expected).abs() < 1e-12 * expected);
}

#[test]
fn intro_mode_needs_a_flat_target() {
    let map = fixtures::flat_to_hyperbolic(17, DerivativeMode::Analytic);
    let err = verify_euclidean_corollaries(&map, 2.0, CorollaryMode::Intro, Extended::Infinite, Extended::Infinite);
    assert!(matches!(err, Err(Error::InvalidArgument(_))));
}

#[test]
fn search_is_deterministic_and_finds_the_flat_family_trivial() {
    let opts = SearchOptions { max_contractions: 2, ..SearchOptions::default() };
    let affine = extremal_ratio_search(&fixtures::affine_family(41), &opts).unwrap();
    assert_eq!(affine.best_ratio, 0.0);
    let a = extremal_ratio_search(&fixtures::sine_family(41), &opts).unwrap();
    let b = extremal_ratio_search(&fixtures::sine_family(41), &opts).unwrap();
    assert_eq!(a.best_ratio.to_bits(), b.best_ratio.to_bits());
    assert_eq!(a.best_params, b.best_params);
    assert!(a.best_ratio > 0.0 && a.best_ratio.is_finite());
    assert!(a.trace.iter().any(|t| t.ratio == Some(a.best_ratio)));
    assert!(a.evaluations <= a.trace.len());
}

#[test]
fn decay_products_stay_bounded_on_the_sphere() {
    let chart = fixtures::sphere_chart(1.0, [FRAC_PI_2 - 0.6, FRAC_PI_2 + 0.6], [-0.6, 0.6], 49, DerivativeMode::Analytic);
    let rows = derivative_decay_experiment(&chart, &[FRAC_PI_2, 0.0], &[0.2, 0.3, 0.4], &HarmonicOptions::default())
        .unwrap();
    assert_eq!(rows.len(), 3);
    for w in rows.windows(2) {
        assert!(w[1].sup_derivative >= w[0].sup_derivative * 0.9);
    }
    assert!(rows.iter().all(|r| r.product.is_finite() && r.product < 1.0));
}

#[test]
fn sphere_radius_is_finite_for_each_holder_exponent() {
    let chart = fixtures::sphere_chart(1.0, [FRAC_PI_2 - 1.2, FRAC_PI_2 + 1.2], [-1.2, 1.2], 65, DerivativeMode::Analytic);
    let radii: Vec<Extended> = [0.3, 0.5, 0.7]
        .iter()
        .map(|&a| estimate_harmonic_radius(&chart, &[FRAC_PI_2, 0.0], 1, a, 1.0, &HarmonicOptions::default()).unwrap().value)
        .collect();
    assert!(radii.iter().all(|r| r.is_finite()), "{radii:?}");
    for w in radii.windows(2) {
        assert!(w[1].value() <= w[0].value(), "{radii:?}");
    }
}
