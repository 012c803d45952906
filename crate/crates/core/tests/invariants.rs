use proptest::prelude::*;

use cz_core::engine::cover::{build_cover, build_cover_points};
use cz_core::engine::global::compute_r_hat;
use cz_core::engine::scaling::{verify_scaling_identities, EllipticOperatorSpec};
use cz_core::field;
use cz_core::fixtures;
use cz_core::lp::Quadrature;
use cz_core::{CoordinateBox, Extended};

fn extended() -> impl Strategy<Value = Extended> {
    prop_oneof![
        3 => (0.01f64..100.0).prop_map(Extended::Finite),
        1 => Just(Extended::Infinite),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn r_hat_is_monotone(r1m in extended(), r1n in extended(), l in extended(), bump in 1.0f64..4.0) {
        let base = compute_r_hat(r1m, r1n, l);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        prop_assert!(base > 0.0 && base <= 1.0 / 16.0);
        let grow = |e: Extended| match e {
            Extended::Finite(v) => Extended::Finite(v * bump),
            Extended::Infinite => Extended::Infinite,
        };
        prop_assert!(compute_r_hat(grow(r1m), r1n, l).unwrap() >= base);
        if let Ok(v) = compute_r_hat(r1m, grow(r1n), l) {
            prop_assert!(v >= base);
        }
        if let Ok(v) = compute_r_hat(r1m, r1n, grow(l)) {
            prop_assert!(v <= base);
        }
    }

    #[test]
    fn extended_round_trips_through_json(e in extended()) {
        let text = serde_json::to_string(&e).unwrap();
        let back: Extended = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn grid_indices_round_trip(nx in 3usize..9, ny in 3usize..9, nz in 3usize..5, pick in 0usize..1000) {
        let b = CoordinateBox::new(vec![0.0, -1.0, 2.0], vec![1.0, 1.0, 3.0], vec![nx, ny, nz]).unwrap();
        let idx = pick % b.len();
        let multi = b.multi_index(idx);
        prop_assert_eq!(b.flat_index(&multi), idx);
        let x = b.point(idx);
        prop_assert_eq!(b.nearest(&x), idx);
        prop_assert!(b.contains(&x));
    }

    #[test]
    fn lp_norms_are_homogeneous(scale in -5.0f64..5.0, p in 1.1f64..6.0) {
        let chart = fixtures::sphere_chart(1.0, [1.0, 2.0], [-0.5, 0.5], 9, cz_core::DerivativeMode::Analytic);
        let quad = Quadrature::new(&chart, None).unwrap();
        let f: Vec<f64> = chart.bounds.points().map(|x| x[0].cos() + x[1]).collect();
        let g: Vec<f64> = f.iter().map(|v| scale * v).collect();
        let (nf, ng) = (quad.norm(&f, None, p).unwrap(), quad.norm(&g, None, p).unwrap());
        prop_assert!((ng - scale.abs() * nf).abs() <= 1e-12 * nf.max(1.0));
    }

    #[test]
    fn scaling_identities_hold_for_polynomials(
        s in 0.05f64..1.0,
        q in 1.1f64..5.0,
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        c in -2.0f64..2.0,
    ) {
        let vars = ["x1", "x2"];
        let u = field::expr(&format!("{a}*x1^3 + ({b})*x1*x2^2 + ({c})*x2"), &vars).unwrap();
        let mut spec = EllipticOperatorSpec::laplacian(2, s, q);
        spec.resolution = 17;
        let rep = verify_scaling_identities(&spec, &u).unwrap();
        prop_assert!(rep.max_defect() <= 1e-10, "{:?}", rep);
    }

    #[test]
    fn flat_covers_match_brute_force(r_hat in 0.3f64..1.5, n in 9usize..17) {
        let chart = fixtures::flat_chart(2, 0.0, 2.0, n);
        prop_assume!(r_hat > chart.bounds.max_step());
        let cover = build_cover(&chart, r_hat).unwrap();
        let pts: Vec<Vec<f64>> = chart.bounds.points().collect();
        let brute = build_cover_points(&pts, r_hat, |x, y| {
            x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        });
        prop_assert!(cover.is_cover());
        prop_assert_eq!(&cover.centers, &brute.centers);
        prop_assert_eq!(cover.multiplicity, brute.multiplicity);
        prop_assert_eq!(cover.min_coverage, brute.min_coverage);
    }
}
