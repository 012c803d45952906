//! Acceptance battery. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::process::ExitCode;
use std::thread;
use std::time::Instant;

use cz_core::engine::corollary::{verify_euclidean_corollaries, CorollaryMode};
use cz_core::engine::global::{compute_r_hat, verify_global_estimate, GlobalOptions, GlobalProblem, GlobalReport};
use cz_core::engine::scaling::{verify_scaling_identities, EllipticOperatorSpec};
use cz_core::field;
use cz_core::fixtures;
use cz_core::geodesic::{ball_extent, geodesic_distance, segment_length};
use cz_core::harmonic::{
    check_hr_conditions, estimate_harmonic_radius, solve_harmonic_chart, HarmonicOptions,
};
use cz_core::lp::Quadrature;
use cz_core::map::{immersion_data, TargetGamma};
use cz_core::{DerivativeMode, Error, Extended, MapModel, MetricChart};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn max_abs_error(values: &[f64], expected: f64) -> f64 {
    values.iter().map(|v| (v - expected).abs()).fold(0.0, f64::max)
}

fn curvature_norms(map: &MapModel) -> (Vec<f64>, Vec<f64>) {
    let jf = map.generalized_hessian(TargetGamma::Pointwise).expect("jets");
    let imm = immersion_data(&jf, &map.source).expect("immersion");
    (imm.second_fundamental_form, imm.mean_curvature)
}

/// Pointwise curvature of closed-form immersions, finite-difference mode.
fn criterion_1() -> Outcome {
    let fd = DerivativeMode::fd;
    let ladder = [17usize, 33, 65];
    let mut ii_err = Vec::new();
    let mut h_err = Vec::new();
    for &n in &ladder {
        let (ii, h) = curvature_norms(&fixtures::sphere_immersion(1.0, n, fd()));
        ii_err.push(max_abs_error(&ii, SQRT_2));
        h_err.push(max_abs_error(&h, 2.0));
    }
    let factors: Vec<f64> = (1..ladder.len())
        .flat_map(|k| [ii_err[k - 1] / ii_err[k], h_err[k - 1] / h_err[k]])
        .collect();
    let (cyl_ii, cyl_h) = curvature_norms(&fixtures::cylinder_immersion(65, fd()));
    let cyl = max_abs_error(&cyl_ii, 1.0).max(max_abs_error(&cyl_h, 1.0));
    let (flat_ii, _) = curvature_norms(&fixtures::graph_map(0.0, 65, fd()));
    let flat = max_abs_error(&flat_ii, 0.0);
    let last = ladder.len() - 1;
    let pass = ii_err[last] <= 1e-3
        && h_err[last] <= 1e-3
        && factors.iter().all(|f| (3.5..=4.5).contains(f))
        && cyl <= 1e-3
        && flat <= 1e-8;
    outcome(
        pass,
        format!(
            "sphere |II| err {:.2e}, |H| err {:.2e} at 64 cells; halving factors {:?}; cylinder err {cyl:.2e}; flat graph |II| {flat:.2e}",
            ii_err[last],
            h_err[last],
            factors.iter().map(|f| (f * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
    )
}

fn all_maps(n: usize, mode: DerivativeMode) -> Vec<MapModel> {
    vec![
        fixtures::sphere_immersion(1.0, n, mode.clone()),
        fixtures::sphere_immersion(0.5, n, mode.clone()),
        fixtures::full_sphere_immersion(1.0, n, mode.clone()),
        fixtures::cylinder_immersion(n, mode.clone()),
        fixtures::graph_map(0.3, n, mode.clone()),
        fixtures::flat_to_hyperbolic(n, mode.clone()),
        fixtures::hyperbolic_source_map(n, mode.clone()),
        fixtures::identity_map(2, -1.0, 1.0, n).with_mode(mode.clone()),
        fixtures::affine_map(n).with_mode(mode.clone()),
        fixtures::sine_map(3.0, n).with_mode(mode),
    ]
}

/// `g^{ij}(Hess u)_ij` against the contracted decomposition.
fn criterion_2() -> Outcome {
    let mut worst = (0.0f64, String::new());
    for mode in [DerivativeMode::Analytic, DerivativeMode::fd()] {
        for map in all_maps(33, mode.clone()) {
            let jf = map.generalized_hessian(TargetGamma::Pointwise).expect("jets");
            let d = jf.trace_identity_defect();
            if d >= worst.0 {
                worst = (d, format!("{}[{}]", map.name, mode_tag(&mode)));
            }
        }
    }
    outcome(worst.0 <= 1e-10, format!("max defect {:.2e} ({})", worst.0, worst.1))
}

fn mode_tag(mode: &DerivativeMode) -> &'static str {
    match mode {
        DerivativeMode::Analytic => "ad",
        DerivativeMode::FiniteDifference { .. } => "fd",
    }
}

/// `h(Hess_ij, ∂_k ψ)` on isometric immersions at 128 cells. Gated on the
/// analytic jets; the grid-step finite-difference values are reported
/// alongside.
fn criterion_3() -> Outcome {
    let n = 129;
    let mut lines = Vec::new();
    let mut worst = 0.0f64;
    for mode in [DerivativeMode::Analytic, DerivativeMode::fd()] {
        for map in [
            fixtures::sphere_immersion(1.0, n, mode.clone()),
            fixtures::sphere_immersion(2.0, n, mode.clone()),
            fixtures::full_sphere_immersion(1.0, n, mode.clone()),
            fixtures::cylinder_immersion(n, mode.clone()),
        ] {
            let jf = map.generalized_hessian(TargetGamma::Pointwise).expect("jets");
            let imm = immersion_data(&jf, &map.source).expect("immersion");
            if mode == DerivativeMode::Analytic {
                worst = worst.max(imm.max_normality_defect);
            }
            lines.push(format!("{}[{}] {:.1e}", map.name, mode_tag(&mode), imm.max_normality_defect));
        }
    }
    outcome(worst <= 1e-5, format!("max analytic defect {worst:.1e} ({})", lines.join(", ")))
}

/// Rescaling identities of the constant-coefficient and a variable-coefficient
/// operator, plus a closed-form check of `P̃ũ = s²(Pu)∼` for `Δ` and
/// `u = x1³ + x1 x2`.
fn criterion_4() -> Outcome {
    let vars = ["x1", "x2"];
    let u = field::expr("x1^3 + x1*x2 + sin(x2)", &vars).unwrap();
    let cubic = field::expr("x1^3 + x1*x2", &vars).unwrap();
    let mut worst = 0.0f64;
    let mut oracle = 0.0f64;
    for s in [0.25, 0.5, 1.0] {
        for q in [1.5, 2.0, 4.0] {
            let lap = EllipticOperatorSpec::laplacian(2, s, q);
            let mut var = EllipticOperatorSpec::laplacian(2, s, q);
            var.coefficients[0][0] = field::expr("1 + 0.1*sin(x1)", &vars).unwrap();
            var.coefficients[0][1] = field::expr("0.05*x2", &vars).unwrap();
            var.coefficients[1][0] = var.coefficients[0][1].clone();
            var.lambda = 2.0;
            for spec in [&lap, &var] {
                worst = worst.max(verify_scaling_identities(spec, &u).expect("scaling").max_defect());
            }
            // Δ(ũ)(x) = 6 s³ x1 for ũ(x) = u(sx)
            let ut = field::rescaled(&cubic, s);
            for x in [[0.3, -0.7], [1.2, 0.4], [-1.5, 1.1]] {
                let j = ut.jet(&x).expect("analytic jet");
                let lap_t = j.second(0, 0) + j.second(1, 1);
                let expected = 6.0 * s.powi(3) * x[0];
                oracle = oracle.max((lap_t - expected).abs());
            }
        }
    }
    outcome(
        worst <= 1e-10 && oracle <= 1e-10,
        format!("max engine defect {worst:.2e}; closed-form operator defect {oracle:.2e}"),
    )
}

/// Harmonic coordinates: flat and constant charts, curved residuals, the
/// flat radius sentinel.
fn criterion_5() -> Outcome {
    let opts = HarmonicOptions::default();
    let flat = fixtures::flat_chart(2, -1.0, 1.0, 41);
    let mut flat_defect = 0.0f64;
    let mut affine_defect = 0.0f64;
    let mut flat_hr2 = 0.0f64;
    for r in [0.3, 0.5, 0.7] {
        let cand = solve_harmonic_chart(&flat, &[0.1, -0.1], r, &opts).expect("flat chart");
        flat_defect = flat_defect.max(cand.pushed_metric_defect());
        flat_hr2 = flat_hr2.max(check_hr_conditions(&cand, 1, 0.5, 7).hr2_value);
        // φ(p) = p − x exactly
        for (p, &node) in cand.members.iter().enumerate() {
            let x = flat.bounds.point(node);
            let d = ((cand.phi[p][0] - (x[0] - 0.1)).abs()).max((cand.phi[p][1] - (x[1] + 0.1)).abs());
            affine_defect = affine_defect.max(d);
        }
    }
    let three = fixtures::conformal_chart(2, 3.0, -1.0, 1.0, 41);
    let cand = solve_harmonic_chart(&three, &[0.0, 0.0], 0.8, &opts).expect("constant chart");
    let const_defect = cand.pushed_metric_defect();

    let mut residual = 0.0f64;
    let sphere = fixtures::sphere_chart(
        1.0,
        [FRAC_PI_2 - 0.6, FRAC_PI_2 + 0.6],
        [-0.6, 0.6],
        65,
        DerivativeMode::Analytic,
    );
    let hyper = fixtures::hyperbolic_chart([-1.0, 1.0], [1.0, 3.0], 65, DerivativeMode::Analytic);
    for (chart, x) in [(&sphere, [FRAC_PI_2, 0.0]), (&hyper, [0.0, 2.0])] {
        for r in [0.1, 0.2, 0.3] {
            let cand = solve_harmonic_chart(chart, &x, r, &opts).expect("curved chart");
            residual = residual.max(cand.laplace_residual);
        }
    }
    let wide = fixtures::flat_chart(2, -12.0, 12.0, 49);
    let est = estimate_harmonic_radius(&wide, &[0.0, 0.0], 1, 0.5, 10.0, &opts).expect("flat radius");
    let pass = flat_defect <= 1e-8
        && affine_defect <= 1e-8
        && flat_hr2 <= 1e-6
        && const_defect <= 1e-8
        && residual <= 1e-6
        && est.value == Extended::Infinite;
    outcome(
        pass,
        format!(
            "flat pushed-metric defect {flat_defect:.1e}, affine defect {affine_defect:.1e}, hr2 {flat_hr2:.1e}; \
             3δ defect {const_defect:.1e}; curved Laplace residual {residual:.1e}; flat radius {} (r_max 10)",
            match est.value {
                Extended::Infinite => "≥ r_max".to_string(),
                Extended::Finite(v) => format!("{v}"),
            }
        ),
    )
}

/// Counts, for every grid node, the cover balls containing it by scanning
/// all centers inside a coordinate box around the node.
fn brute_force_cover(chart: &MetricChart, report: &GlobalReport) -> (u32, u32) {
    let b = &chart.bounds;
    let r_hat = report.r_hat;
    let extent = ball_extent(chart, r_hat).expect("extent");
    let centers: Vec<Vec<f64>> = report.cover.centers.iter().map(|&c| b.point(c)).collect();
    let exact = chart.constant_matrix().cloned();
    let (mut min_small, mut max_large) = (u32::MAX, 0u32);
    for i in 0..b.len() {
        let x = b.point(i);
        let (mut small, mut large) = (0u32, 0u32);
        for c in &centers {
            if c.iter().zip(&x).zip(&extent).any(|((a, b), e)| (a - b).abs() > e * (1.0 + 1e-12)) {
                continue;
            }
            let d = match &exact {
                Some(g) => {
                    let v = nalgebra::DVector::from_iterator(x.len(), c.iter().zip(&x).map(|(a, b)| a - b));
                    (v.transpose() * g * &v)[(0, 0)].sqrt()
                }
                None => segment_length(chart, c, &x),
            };
            small += (d <= r_hat / 8.0) as u32;
            large += (d <= r_hat) as u32;
        }
        min_small = min_small.min(small);
        max_large = max_large.max(large);
    }
    (min_small, max_large)
}

type Builder = fn(usize) -> GlobalProblem;

struct BatteryRun {
    fixture: &'static str,
    n: usize,
    p: f64,
    report: Result<GlobalReport, Error>,
}

fn battery() -> Vec<(&'static str, Builder)> {
    vec![
        ("sphere", |n| fixtures::sphere_problem(n, DerivativeMode::Analytic)),
        ("cylinder", |n| fixtures::cylinder_problem(n, DerivativeMode::Analytic)),
        ("graph", |n| fixtures::graph_problem(0.3, n, DerivativeMode::Analytic)),
        ("hyperbolic-source", |n| fixtures::hyperbolic_source_problem(n, DerivativeMode::Analytic)),
        ("affine", fixtures::affine_problem),
    ]
}

const PS: [f64; 3] = [1.5, 2.0, 4.0];
const LADDER: [usize; 2] = [65, 129];

/// Runs every fixture at every resolution and exponent. The harmonic radii
/// do not depend on `p`, so the `p = 2` run estimates them and the other
/// exponents reuse them as declared radii.
fn run_battery() -> Vec<BatteryRun> {
    let jobs: Vec<(&'static str, Builder, usize)> =
        battery().into_iter().flat_map(|(name, b)| LADDER.iter().map(move |&n| (name, b, n))).collect();
    thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|(fixture, build, n)| {
                scope.spawn(move || {
                    let mut problem = build(n);
                    let mut out = Vec::new();
                    let first = verify_global_estimate(&problem, &GlobalOptions::default());
                    if let Ok(rep) = &first {
                        problem.source = problem.source.clone().with_harmonic_radius(rep.r1_source);
                        problem.target = problem.target.clone().with_harmonic_radius(rep.r1_target);
                    }
                    out.push(BatteryRun { fixture, n, p: 2.0, report: first });
                    for p in PS.into_iter().filter(|&p| p != 2.0) {
                        let opts = GlobalOptions { p, ..GlobalOptions::default() };
                        out.push(BatteryRun { fixture, n, p, report: verify_global_estimate(&problem, &opts) });
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("battery thread")).collect()
    })
}

fn criterion_6(runs: &[BatteryRun]) -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    let mut max_d = 0;
    // the cover depends on the chart and r̂ only, so one exponent suffices
    thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .filter(|r| r.p == 2.0)
            .filter_map(|r| r.report.as_ref().ok().map(|rep| (r, rep)))
            .map(|(run, rep)| {
                scope.spawn(move || {
                    let chart = battery().into_iter().find(|(f, _)| *f == run.fixture).map(|(_, b)| b(run.n)).unwrap();
                    let (small, large) = brute_force_cover(&chart.map.source, rep);
                    (run, rep, small, large)
                })
            })
            .collect();
        for h in handles {
            let (run, rep, small, large) = h.join().expect("cover thread");
            checked += 1;
            max_d = max_d.max(large);
            if small < 1 || large > rep.cover.multiplicity {
                failures.push(format!("{}@{}: min coverage {small}, overlap {large} vs D {}", run.fixture, run.n, rep.cover.multiplicity));
            }
        }
    });
    let errored = runs.iter().filter(|r| r.report.is_err()).count();
    outcome(
        failures.is_empty() && errored == 0 && checked > 0,
        if failures.is_empty() {
            format!("{checked} covers verified node by node, largest D = {max_d}")
        } else {
            failures.join("; ")
        },
    )
}

fn criterion_7(runs: &[BatteryRun]) -> Outcome {
    let mut problems = Vec::new();
    let mut max_drift = 0.0f64;
    for (fixture, _) in battery() {
        for p in PS {
            let get = |n: usize| {
                runs.iter()
                    .find(|r| r.fixture == fixture && r.n == n && r.p == p)
                    .map(|r| r.report.as_ref().map(|rep| rep.ratio).map_err(|e| e.to_string()))
                    .unwrap()
            };
            match (get(LADDER[0]), get(LADDER[1])) {
                (Ok(a), Ok(b)) => {
                    if !a.is_finite() || !b.is_finite() {
                        problems.push(format!("{fixture} p={p}: non-finite ratio"));
                    } else if fixture == "affine" {
                        if a != 0.0 || b != 0.0 {
                            problems.push(format!("affine p={p}: ratio {a}, {b}"));
                        }
                    } else {
                        let drift = (b - a).abs() / a.abs();
                        max_drift = max_drift.max(drift);
                        if !(drift < 0.1) {
                            problems.push(format!("{fixture} p={p}: drift {:.1}%", 100.0 * drift));
                        }
                    }
                }
                (Err(e), _) | (_, Err(e)) => problems.push(format!("{fixture} p={p}: {e}")),
            }
        }
    }
    for r in runs {
        if let Ok(rep) = &r.report {
            if !rep.invariants_hold() {
                problems.push(format!("{}@{} p={}: center dichotomy or summation check failed", r.fixture, r.n, r.p));
            }
        }
    }
    // determinism: repeat the coarse p = 2 runs from scratch
    for (fixture, build) in battery() {
        let again = verify_global_estimate(&build(LADDER[0]), &GlobalOptions::default()).map(|r| r.ratio);
        let first = runs
            .iter()
            .find(|r| r.fixture == fixture && r.n == LADDER[0] && r.p == 2.0)
            .and_then(|r| r.report.as_ref().ok().map(|rep| rep.ratio));
        match (first, again) {
            (Some(a), Ok(b)) if a.to_bits() == b.to_bits() => {}
            (a, b) => problems.push(format!("{fixture}: repeat run differs ({a:?} vs {b:?})")),
        }
    }
    let table: Vec<String> = runs
        .iter()
        .filter(|r| r.n == LADDER[1])
        .map(|r| match &r.report {
            Ok(rep) => format!("{}[p={}] {:.4}", r.fixture, r.p, rep.ratio),
            Err(e) => format!("{}[p={}] error {e}", r.fixture, r.p),
        })
        .collect();
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("max drift {:.2}% over {}→{} nodes; ratios at {}: {}", 100.0 * max_drift, LADDER[0], LADDER[1], LADDER[1], table.join(", "))
        } else {
            problems.join("; ")
        },
    )
}

fn criterion_8() -> Outcome {
    use Extended::{Finite, Infinite};
    let cases = [
        ((Finite(2.0), Finite(1.0), Finite(4.0)), 1.0 / 64.0),
        ((Infinite, Infinite, Infinite), 1.0 / 16.0),
        ((Finite(0.5), Infinite, Finite(3.0)), 1.0 / 32.0),
    ];
    let mut got = Vec::new();
    let mut pass = true;
    for ((a, b, c), want) in cases {
        let v = compute_r_hat(a, b, c);
        pass &= matches!(v, Ok(x) if x == want);
        got.push(format!("{v:?}"));
    }
    let degenerate = matches!(compute_r_hat(Infinite, Finite(1.0), Infinite), Err(Error::DegenerateRadius));
    outcome(pass && degenerate, format!("{} and DegenerateRadius for (∞, 1, ∞): {degenerate}", got.join(", ")))
}

fn criterion_9() -> Outcome {
    let target = 1.0 / SQRT_2;
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for mode in [DerivativeMode::Analytic, DerivativeMode::fd()] {
        for rho in [0.5, 1.0, 2.0] {
            let map = fixtures::sphere_immersion(rho, 65, mode.clone());
            let rep = verify_euclidean_corollaries(&map, 2.0, CorollaryMode::Intro, Extended::Infinite, Extended::Infinite)
                .expect("corollary");
            let q = rep.ii_norm / rep.h_norm;
            worst = worst.max((q - target).abs());
            lines.push(format!("ρ={rho}: {q:.6}"));
        }
    }
    outcome(worst <= 1e-3, format!("max |ratio − 1/√2| {worst:.1e} ({})", lines.join(", ")))
}

/// `g → 4g` on a curved chart.
fn criterion_10() -> Outcome {
    let mut dist_defect = 0.0f64;
    let mut norm_defect = 0.0f64;
    let mut gamma_defect = 0.0f64;
    for mode in [DerivativeMode::Analytic, DerivativeMode::fd()] {
        let g = fixtures::sphere_chart(1.0, [FRAC_PI_2 - 0.6, FRAC_PI_2 + 0.6], [-0.6, 0.6], 65, mode);
        let g4 = g.scaled(4.0);
        let pairs = [
            ([FRAC_PI_2, 0.0], [FRAC_PI_2 + 0.3, 0.2]),
            ([FRAC_PI_2 - 0.4, -0.3], [FRAC_PI_2 + 0.2, 0.4]),
            ([1.3, 0.1], [1.35, -0.05]),
        ];
        for (x, y) in pairs {
            let d1 = geodesic_distance(&g, &x, &y).expect("distance").value;
            let d4 = geodesic_distance(&g4, &x, &y).expect("distance").value;
            dist_defect = dist_defect.max((d4 - 2.0 * d1).abs() / d1);
        }
        let f: Vec<f64> = g.bounds.points().map(|x| x[0].sin() * x[1].cos() + 0.5).collect();
        let n1 = Quadrature::new(&g, None).unwrap().norm(&f, None, 2.0).unwrap();
        let n4 = Quadrature::new(&g4, None).unwrap().norm(&f, None, 2.0).unwrap();
        norm_defect = norm_defect.max((n4 - 2.0 * n1).abs() / n1);
        for x in [[FRAC_PI_2, 0.0], [1.2, 0.3], [1.9, -0.5]] {
            let a = g.christoffel_at(&x).unwrap();
            let b = g4.christoffel_at(&x).unwrap();
            let d = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            gamma_defect = gamma_defect.max(d);
        }
    }
    outcome(
        dist_defect <= 1e-6 && norm_defect <= 1e-6 && gamma_defect <= 1e-6,
        format!("distance defect {dist_defect:.1e}, L² defect {norm_defect:.1e}, Christoffel defect {gamma_defect:.1e}"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let battery_handle = thread::spawn(run_battery);
    let mut results: Vec<(usize, Outcome)> = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3()),
        (4, criterion_4()),
        (5, criterion_5()),
        (8, criterion_8()),
        (9, criterion_9()),
        (10, criterion_10()),
    ];
    let runs = battery_handle.join().expect("battery");
    results.push((6, criterion_6(&runs)));
    results.push((7, criterion_7(&runs)));
    results.sort_by_key(|(k, _)| *k);
    let mut failed = 0;
    for (k, o) in &results {
        println!("{} criterion {k}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += (!o.pass) as usize;
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
