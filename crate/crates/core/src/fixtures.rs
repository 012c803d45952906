//! Manifolds, maps and map families with closed-form geometry.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::engine::global::GlobalProblem;
use crate::engine::search::MapFamily;
use crate::engine::Extended;
use crate::field::{self, Field};
use crate::grid::CoordinateBox;
use crate::map::MapModel;
use crate::metric::{DerivativeMode, ManifoldModel, MetricChart};

const XY: [&str; 2] = ["x", "y"];
const XYZ: [&str; 3] = ["x", "y", "z"];
const SPHERE_VARS: [&str; 2] = ["theta", "phi"];

/// Half-width of the sphere window around the equator point `(π/2, 0)`.
pub const SPHERE_WINDOW: f64 = 0.4;
/// Distance from the poles kept by the full sphere chart.
pub const POLE_GAP: f64 = 1e-3;

fn ex(text: &str, vars: &[&str]) -> Field {
    field::expr(text, vars).expect("fixture expressions parse")
}

fn unit_box(m: usize, lo: f64, hi: f64, n: usize) -> CoordinateBox {
    CoordinateBox::uniform(vec![lo; m], vec![hi; m], n).expect("fixture box")
}

pub fn flat_chart(m: usize, lo: f64, hi: f64, n: usize) -> MetricChart {
    MetricChart::euclidean(format!("R{m}"), unit_box(m, lo, hi, n)).expect("flat chart")
}

/// `c·δ` on `[lo, hi]^m`.
pub fn conformal_chart(m: usize, c: f64, lo: f64, hi: f64, n: usize) -> MetricChart {
    MetricChart::constant(format!("{c}*R{m}"), unit_box(m, lo, hi, n), &(DMatrix::identity(m, m) * c))
        .expect("conformal chart")
}

/// Round sphere of radius `rho` in spherical coordinates `(θ, φ)`:
/// `g = ρ²(dθ² + sin²θ dφ²)`.
pub fn sphere_chart(rho: f64, theta: [f64; 2], phi: [f64; 2], n: usize, mode: DerivativeMode) -> MetricChart {
    let b = CoordinateBox::uniform(vec![theta[0], phi[0]], vec![theta[1], phi[1]], n).expect("sphere box");
    let r2 = rho * rho;
    MetricChart::from_upper(
        format!("S2({rho})"),
        b,
        vec![field::constant(r2), field::constant(0.0), ex(&format!("{r2} * sin(theta)^2"), &SPHERE_VARS)],
        mode,
    )
    .expect("sphere chart")
}

/// Upper half-plane `(dx² + dy²)/y²`.
pub fn hyperbolic_chart(x: [f64; 2], y: [f64; 2], n: usize, mode: DerivativeMode) -> MetricChart {
    let b = CoordinateBox::uniform(vec![x[0], y[0]], vec![x[1], y[1]], n).expect("hyperbolic box");
    let inv = ex("1 / y^2", &XY);
    MetricChart::from_upper("H2", b, vec![inv.clone(), field::constant(0.0), inv], mode).expect("hyperbolic chart")
}

fn euclidean_target(n: usize, half_width: f64) -> Arc<MetricChart> {
    Arc::new(flat_chart(n, -half_width, half_width, 5))
}

fn sphere_map(name: String, chart: MetricChart, rho: f64) -> MapModel {
    let comps = vec![
        ex(&format!("{rho} * sin(theta) * cos(phi)"), &SPHERE_VARS),
        ex(&format!("{rho} * sin(theta) * sin(phi)"), &SPHERE_VARS),
        ex(&format!("{rho} * cos(theta)"), &SPHERE_VARS),
    ];
    MapModel::new(name, Arc::new(chart), euclidean_target(3, 2.0 * rho), comps, Extended::Finite(1.0))
        .expect("sphere map")
}

/// The standard embedding of the `rho`-sphere on the window
/// `|θ − π/2|, |φ| ≤ 0.4`.
pub fn sphere_immersion(rho: f64, n: usize, mode: DerivativeMode) -> MapModel {
    let w = SPHERE_WINDOW;
    sphere_map(format!("sphere({rho})"), sphere_chart(rho, [FRAC_PI_2 - w, FRAC_PI_2 + w], [-w, w], n, mode), rho)
}

/// The embedding over the whole sphere minus `POLE_GAP`-caps at the poles.
pub fn full_sphere_immersion(rho: f64, n: usize, mode: DerivativeMode) -> MapModel {
    sphere_map(format!("full-sphere({rho})"), sphere_chart(rho, [POLE_GAP, PI - POLE_GAP], [-PI, PI], n, mode), rho)
}

/// Unit cylinder `(θ, z) ↦ (cos θ, sin θ, z)`, `|θ| ≤ 0.8`, `|z| ≤ 1`.
pub fn cylinder_immersion(n: usize, mode: DerivativeMode) -> MapModel {
    let vars = ["theta", "z"];
    let b = CoordinateBox::uniform(vec![-0.8, -1.0], vec![0.8, 1.0], n).expect("cylinder box");
    let src = MetricChart::euclidean("cylinder", b).expect("cylinder chart").with_mode(mode);
    let comps = vec![ex("cos(theta)", &vars), ex("sin(theta)", &vars), ex("z", &vars)];
    MapModel::new("cylinder", Arc::new(src), euclidean_target(3, 2.0), comps, Extended::Finite(1.0))
        .expect("cylinder map")
}

/// Graph `(x, y) ↦ (x, y, ε(x² − y²))` of the unit square `[−1, 1]²`.
pub fn graph_map(eps: f64, n: usize, mode: DerivativeMode) -> MapModel {
    let src = flat_chart(2, -1.0, 1.0, n).with_mode(mode);
    let comps = vec![ex("x", &XY), ex("y", &XY), ex(&format!("{eps} * (x^2 - y^2)"), &XY)];
    let lip = (1.0 + 8.0 * eps * eps).sqrt();
    MapModel::new(format!("graph({eps})"), Arc::new(src), euclidean_target(3, 2.0), comps, Extended::Finite(lip))
        .expect("graph map")
}

/// The plane `z = 0` in `ℝ³`.
pub fn flat_plane_graph(n: usize) -> MapModel {
    graph_map(0.0, n, DerivativeMode::Analytic)
}

/// A map from the flat square into the upper half-plane.
pub fn flat_to_hyperbolic(n: usize, mode: DerivativeMode) -> MapModel {
    let src = flat_chart(2, -1.0, 1.0, n).with_mode(mode.clone());
    let tgt = hyperbolic_chart([-1.0, 1.0], [1.0, 3.0], 33, mode);
    let comps = vec![ex("0.5*x + 0.2*y^2", &XY), ex("2 + 0.5*y + 0.1*x^2", &XY)];
    MapModel::new("flat-to-H2", Arc::new(src), Arc::new(tgt), comps, Extended::Finite(1.0)).expect("map")
}

/// `(x, y) ↦ (sin x, log y)` from the half-plane window `[−1/2, 1/2] × [2, 3]`.
pub fn hyperbolic_source_map(n: usize, mode: DerivativeMode) -> MapModel {
    let src = hyperbolic_chart([-0.5, 0.5], [2.0, 3.0], n, mode);
    let comps = vec![ex("sin(x)", &XY), ex("log(y)", &XY)];
    MapModel::new("H2-to-R2", Arc::new(src), euclidean_target(2, 2.0), comps, Extended::Finite(3.0)).expect("map")
}

pub fn identity_map(m: usize, lo: f64, hi: f64, n: usize) -> MapModel {
    let chart = Arc::new(flat_chart(m, lo, hi, n));
    let comps = XYZ[..m].iter().map(|v| ex(v, &XYZ[..m])).collect();
    MapModel::new("identity", chart.clone(), chart, comps, Extended::Finite(1.0)).expect("identity")
}

/// `(x, y) ↦ (a x + b y + 1, x + 3y)`; the default `(a, b) = (2, −1)`.
pub fn affine_map_with(a: f64, b: f64, n: usize) -> MapModel {
    let src = flat_chart(2, -1.0, 1.0, n);
    let comps = vec![ex(&format!("{a}*x + ({b})*y + 1"), &XY), ex("x + 3*y", &XY)];
    let lip = DMatrix::from_row_slice(2, 2, &[a, b, 1.0, 3.0]).norm();
    MapModel::new("affine", Arc::new(src), euclidean_target(2, 12.0), comps, Extended::Finite(lip)).expect("affine")
}

pub fn affine_map(n: usize) -> MapModel {
    affine_map_with(2.0, -1.0, n)
}

/// `(x, y) ↦ sin(kx)/k` into `ℝ`.
pub fn sine_map(k: f64, n: usize) -> MapModel {
    let src = flat_chart(2, -1.0, 1.0, n);
    let comps = vec![ex(&format!("sin({k}*x) / {k}"), &XY)];
    MapModel::new(format!("sine({k})"), Arc::new(src), euclidean_target(1, 2.0), comps, Extended::Finite(1.0))
        .expect("sine map")
}

/// Wraps a map into a global problem: the source and target models carry
/// the given Ricci lower-bound parameters, `o` is the target chart center.
pub fn problem(map: MapModel, source_ricci: f64, target_ricci: f64) -> GlobalProblem {
    let model = |chart: &Arc<MetricChart>, a: f64| ManifoldModel {
        name: chart.name.clone(),
        dimension: chart.dim(),
        atlas: vec![crate::metric::AtlasChart { chart: chart.clone(), partition: None }],
        ricci_lower_bound: a,
        base_points: Vec::new(),
        harmonic_radius: None,
    };
    let tb = &map.target.bounds;
    let basepoint = tb.lower.iter().zip(&tb.upper).map(|(l, u)| 0.5 * (l + u)).collect();
    GlobalProblem {
        source: model(&map.source, source_ricci),
        target: model(&map.target, target_ricci),
        map,
        basepoint,
    }
}

pub fn sphere_problem(n: usize, mode: DerivativeMode) -> GlobalProblem {
    problem(sphere_immersion(1.0, n, mode), 0.0, 0.0)
}

pub fn cylinder_problem(n: usize, mode: DerivativeMode) -> GlobalProblem {
    problem(cylinder_immersion(n, mode), 0.0, 0.0)
}

pub fn graph_problem(eps: f64, n: usize, mode: DerivativeMode) -> GlobalProblem {
    problem(graph_map(eps, n, mode), 0.0, 0.0)
}

pub fn hyperbolic_source_problem(n: usize, mode: DerivativeMode) -> GlobalProblem {
    problem(hyperbolic_source_map(n, mode), 1.0, 0.0)
}

pub fn affine_problem(n: usize) -> GlobalProblem {
    problem(affine_map(n), 0.0, 0.0)
}

/// Affine maps `(a, b) ∈ [−2, 2]²`.
pub fn affine_family(n: usize) -> MapFamily {
    MapFamily {
        name: "affine".into(),
        lower: vec![-2.0, -2.0],
        upper: vec![2.0, 2.0],
        build: Box::new(move |p| Ok(problem(affine_map_with(p[0], p[1], n), 0.0, 0.0))),
    }
}

/// `sin(kx)/k`, `k ∈ [1, 8]`.
pub fn sine_family(n: usize) -> MapFamily {
    MapFamily {
        name: "sine".into(),
        lower: vec![1.0],
        upper: vec![8.0],
        build: Box::new(move |p| Ok(problem(sine_map(p[0], n), 0.0, 0.0))),
    }
}

/// Graphs `z = ε(x² − y²)`, `ε ∈ [0, 0.5]`.
pub fn graph_family(n: usize) -> MapFamily {
    MapFamily {
        name: "graph".into(),
        lower: vec![0.0],
        upper: vec![0.5],
        build: Box::new(move |p| Ok(graph_problem(p[0], n, DerivativeMode::Analytic))),
    }
}
