//! The global estimate for a Lipschitz map `ψ: M → N`:
//!
//! ```text
//! ‖Hess ψ‖_p ≲ ‖Δψ‖_p + r⁻¹‖dψ‖_p + r₁(N)⁻¹‖dψ‖²_{2p} + r⁻²‖dist_N(ψ, o)‖_p
//! ```
//!
//! with `r = min(r₁(M), r₁(N)/max(L, 1), 1)`. The pipeline also replays the
//! localization argument: a cover by balls of radius `r̂ = r/16`, the split of
//! centers by whether `ψ(x̄)` stays near `o`, per-center ball estimates and the
//! summation with the measured overlap.

use serde::Serialize;

use crate::engine::ball::{NodeFields, Terms};
use crate::engine::cover::{build_cover, Cover};
use crate::engine::Extended;
use crate::geodesic::{self, ball_extent, segment_ball};
use crate::harmonic::{manifold_radius, HarmonicOptions, RadiusEstimate};
use crate::lp::{check_exponent, dist_to_basepoint_field};
use crate::map::MapModel;
use crate::metric::{ManifoldModel, MetricChart};
use crate::Error;

/// `r̂ = (1/16) min(r₁(M), r₁(N)/max(L, 1), 1)` with `∞/∞ = 1`.
pub fn compute_r_hat(r1m: Extended, r1n: Extended, lipschitz: Extended) -> Result<f64, Error> {
    for v in [r1m, r1n, lipschitz] {
        if let Extended::Finite(x) = v {
            if !(x > 0.0) {
                return Err(Error::InvalidArgument(format!("radii and Lipschitz bounds must be positive, got {x}")));
            }
        }
    }
    let target = match (r1n, lipschitz) {
        (Extended::Infinite, Extended::Infinite) => 1.0,
        (Extended::Finite(_), Extended::Infinite) => return Err(Error::DegenerateRadius),
        (n, Extended::Finite(l)) => n.value() / l.max(1.0),
    };
    Ok(r1m.value().min(target).min(1.0) / 16.0)
}

/// Nodes whose image lies within `r₁(N)/4` of `o`, with the distances.
#[derive(Clone, Debug)]
pub struct OmegaMask {
    pub mask: Vec<bool>,
    /// `dist_N(ψ(x), o)` per source node.
    pub dist: Vec<f64>,
}

pub fn omega_decomposition(map: &MapModel, o: &[f64], r1n: Extended) -> Result<OmegaMask, Error> {
    map.target.metric_at(o)?;
    let dist = dist_to_basepoint_field(map, o)?;
    let quarter = r1n.value() / 4.0;
    let mask = dist.iter().map(|&d| d < quarter).collect();
    Ok(OmegaMask { mask, dist })
}

#[derive(Clone, Debug)]
pub struct GlobalProblem {
    pub source: ManifoldModel,
    pub target: ManifoldModel,
    pub map: MapModel,
    /// The target point `o`.
    pub basepoint: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GlobalOptions {
    pub p: f64,
    /// Largest radius tried by the harmonic radius estimator; by default
    /// the largest ball around the base points that fits the chart.
    pub r_max: Option<f64>,
    pub harmonic: HarmonicOptions,
    pub seed: u64,
    /// Relative slack when checking the declared Lipschitz bound.
    pub lipschitz_tol: f64,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        GlobalOptions { p: 2.0, r_max: None, harmonic: HarmonicOptions::default(), seed: 7, lipschitz_tol: 1e-2 }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct GlobalTerms {
    pub lhs_hess: f64,
    pub t_laplacian: f64,
    /// `r⁻¹‖dψ‖_p`.
    pub t_du: f64,
    /// `r₁(N)⁻¹‖dψ‖²_{2p}`; zero when `r₁(N) = ∞`.
    pub t_du_2p_sq: f64,
    /// `r⁻²‖dist_N(ψ, o)‖_p`.
    pub t_dist: f64,
}

impl GlobalTerms {
    pub fn rhs(&self) -> f64 {
        self.t_laplacian + self.t_du + self.t_du_2p_sq + self.t_dist
    }

    pub fn ratio(&self) -> f64 {
        if self.lhs_hess == 0.0 {
            0.0
        } else {
            self.lhs_hess / self.rhs()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CenterStats {
    pub count: usize,
    pub in_omega: usize,
    pub in_complement: usize,
    /// Centers in Ω whose `B_{2r̂}` image left `B_{r₁(N)/2}(o)`.
    pub containment_failures: usize,
    /// Sampled points of complement centers where
    /// `dist(ψ(x), ψ(x̄)) > dist(ψ(x), o)`.
    pub comparison_failures: usize,
    pub max_ratio: f64,
}

/// Summation of per-center integrals against `D` times the global ones
/// (`p`-th powers).
#[derive(Clone, Debug, Serialize)]
pub struct Summation {
    pub multiplicity: u32,
    /// `Σ_j ∫_{B_{r̂/8}(x_j)} |Hess|^p` and `∫ |Hess|^p`.
    pub hess_sum: f64,
    pub hess_global: f64,
    /// `Σ_j ∫_{B_{r̂}(x_j)} f` and `∫ f` for `f = |Δψ|^p, |dψ|^p, |dψ|^{2p},
    /// dist^p`.
    pub rhs_sums: [f64; 4],
    pub rhs_global: [f64; 4],
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GlobalReport {
    pub p: f64,
    pub r1_source: Extended,
    pub r1_target: Extended,
    pub lipschitz: Extended,
    pub lipschitz_estimate: f64,
    pub r: f64,
    pub r_hat: f64,
    pub terms: GlobalTerms,
    pub ratio: f64,
    pub omega_nodes: usize,
    pub complement_nodes: usize,
    pub cover: Cover,
    pub centers: CenterStats,
    pub summation: Summation,
    pub trace_identity_defect: f64,
    pub ricci_warnings: usize,
    pub radius_estimates: Vec<RadiusEstimate>,
    pub resolution: Vec<usize>,
}

impl GlobalReport {
    /// Cover, Ω dichotomy and summation all verified.
    pub fn invariants_hold(&self) -> bool {
        self.cover.is_cover()
            && self.centers.containment_failures == 0
            && self.centers.comparison_failures == 0
            && self.summation.holds
    }
}

/// Largest metric radius around `x` whose coordinate extent stays in the box.
pub fn fitting_radius(chart: &MetricChart, x: &[f64]) -> Result<f64, Error> {
    let unit = ball_extent(chart, 1.0)?;
    let b = &chart.bounds;
    let mut r = f64::INFINITY;
    for k in 0..b.dim() {
        let room = (x[k] - b.lower[k]).min(b.upper[k] - x[k]) - b.step(k);
        r = r.min(room / unit[k]);
    }
    Ok(r.max(0.0))
}

/// Harmonic radius of a model at its base points (or chart center), with the
/// default `r_max` the fitting radius there.
pub fn model_radius(model: &ManifoldModel, opts: &GlobalOptions) -> Result<(Extended, Vec<RadiusEstimate>), Error> {
    let chart = model.chart();
    let points: Vec<Vec<f64>> = if model.base_points.is_empty() {
        let b = &chart.bounds;
        vec![b.lower.iter().zip(&b.upper).map(|(l, u)| 0.5 * (l + u)).collect()]
    } else {
        model.base_points.clone()
    };
    let r_max = match opts.r_max {
        Some(r) => r,
        None => {
            let mut r = f64::INFINITY;
            for p in &points {
                r = r.min(fitting_radius(chart, p)?);
            }
            r
        }
    };
    let charts: Vec<_> = model.atlas.iter().map(|a| a.chart.clone()).collect();
    manifold_radius(&charts, model.harmonic_radius, &points, r_max, &opts.harmonic)
}

pub fn verify_global_estimate(problem: &GlobalProblem, opts: &GlobalOptions) -> Result<GlobalReport, Error> {
    let p = opts.p;
    check_exponent(p)?;
    problem.source.validate()?;
    problem.target.validate()?;
    let map = &problem.map;
    map.check_containment()?;
    let lipschitz_estimate = map.check_lipschitz(opts.lipschitz_tol, opts.seed)?;
    let (r1m, mut estimates) = model_radius(&problem.source, opts)?;
    let (r1n, est_n) = model_radius(&problem.target, opts)?;
    estimates.extend(est_n);
    let r_hat = compute_r_hat(r1m, r1n, map.lipschitz)?;
    let r = 16.0 * r_hat;
    let ricci_warnings = problem.source.ricci_warnings()?.len() + problem.target.ricci_warnings()?.len();

    let src = &map.source;
    let b = &src.bounds;
    let all: Vec<usize> = (0..b.len()).collect();
    let fields = NodeFields::compute(map, &all)?;
    let omega = omega_decomposition(map, &problem.basepoint, r1n)?;
    let terms = GlobalTerms {
        lhs_hess: fields.norm(&fields.hess, &all, p),
        t_laplacian: fields.norm(&fields.laplacian, &all, p),
        t_du: fields.norm(&fields.du, &all, p) / r,
        t_du_2p_sq: fields.du_sq_norm(&all, p) * r1n.recip(),
        t_dist: fields.norm(&omega.dist, &all, p) / (r * r),
    };

    let cover = build_cover(src, r_hat)?;
    let extent = ball_extent(src, 2.0 * r_hat)?;
    let half_r1n = r1n.value() / 2.0;
    let big_r_inv = Extended::from_f64(half_r1n).recip();
    let mut stats = CenterStats {
        count: cover.centers.len(),
        in_omega: 0,
        in_complement: 0,
        containment_failures: 0,
        comparison_failures: 0,
        max_ratio: 0.0,
    };
    let mut hess_sum = 0.0;
    let mut rhs_sums = [0.0; 4];
    for &c in &cover.centers {
        let center = b.point(c);
        let ball = segment_ball(src, &center, 2.0 * r_hat, &extent);
        let wide: Vec<usize> = ball.iter().map(|&(i, _)| i).collect();
        let mid: Vec<usize> = ball.iter().filter(|&&(_, d)| d <= r_hat).map(|&(i, _)| i).collect();
        let inner: Vec<usize> = ball.iter().filter(|&&(_, d)| d <= r_hat / 8.0).map(|&(i, _)| i).collect();
        let mut local_dist = vec![0.0; b.len()];
        if omega.mask[c] {
            stats.in_omega += 1;
            if wide.iter().any(|&i| !(omega.dist[i] < half_r1n)) {
                stats.containment_failures += 1;
            }
            for &i in &wide {
                local_dist[i] = omega.dist[i];
            }
        } else {
            stats.in_complement += 1;
            let y = map.image(&center).map_err(|e| e.at_center(&center))?;
            let images: Vec<Vec<f64>> = wide
                .iter()
                .map(|&i| map.image(&b.point(i)))
                .collect::<Result<_, _>>()
                .map_err(|e| e.at_center(&center))?;
            let d = geodesic::distances_from(&map.target, &y, &images).map_err(|e| e.at_center(&center))?;
            for (&i, dv) in wide.iter().zip(d) {
                local_dist[i] = dv;
                if dv > omega.dist[i] * (1.0 + 1e-9) + 1e-12 {
                    stats.comparison_failures += 1;
                }
            }
        }
        let t = Terms {
            lhs: fields.norm(&fields.hess, &inner, p),
            t1: fields.norm(&fields.laplacian, &mid, p),
            t2: fields.du_sq_norm(&mid, p) * big_r_inv,
            t3: fields.norm(&local_dist, &mid, p) / (r_hat * r_hat),
            t4: fields.norm(&fields.du, &mid, p) / r_hat,
        };
        stats.max_ratio = stats.max_ratio.max(t.ratio());
        hess_sum += fields.integral_pow(&fields.hess, &inner, p);
        rhs_sums[0] += fields.integral_pow(&fields.laplacian, &mid, p);
        rhs_sums[1] += fields.integral_pow(&fields.du, &mid, p);
        rhs_sums[2] += fields.integral_pow(&fields.du, &mid, 2.0 * p);
        rhs_sums[3] += fields.integral_pow(&local_dist, &mid, p);
    }
    let hess_global = fields.integral_pow(&fields.hess, &all, p);
    let rhs_global = [
        fields.integral_pow(&fields.laplacian, &all, p),
        fields.integral_pow(&fields.du, &all, p),
        fields.integral_pow(&fields.du, &all, 2.0 * p),
        fields.integral_pow(&omega.dist, &all, p),
    ];
    let d = cover.multiplicity as f64;
    let slack = 1.0 + 1e-9;
    let holds = hess_sum * slack >= hess_global
        && rhs_sums.iter().zip(&rhs_global).all(|(s, g)| *s <= d * g * slack + 1e-300);
    let summation = Summation { multiplicity: cover.multiplicity, hess_sum, hess_global, rhs_sums, rhs_global, holds };
    let omega_nodes = omega.mask.iter().filter(|&&m| m).count();
    Ok(GlobalReport {
        p,
        r1_source: r1m,
        r1_target: r1n,
        lipschitz: map.lipschitz,
        lipschitz_estimate,
        r,
        r_hat,
        ratio: terms.ratio(),
        terms,
        omega_nodes,
        complement_nodes: b.len() - omega_nodes,
        cover,
        centers: stats,
        summation,
        trace_identity_defect: fields.trace_identity_defect,
        ricci_warnings,
        radius_estimates: estimates,
        resolution: b.resolution.clone(),
    })
}
