//! First and second order calculus of maps between charts.
//!
//! For `u: (U, g) → (V, h)` with components `u^α` the generalized Hessian is
//!
//! ```text
//! (Hess u)^α_ij = ∂_i∂_j u^α − ^MΓ^l_ij ∂_l u^α + ^NΓ^α_βγ(u) ∂_i u^β ∂_j u^γ
//! ```
//!
//! and the generalized Laplacian is its `g`-trace. The last term is kept
//! separately as `T^α_ij`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::Extended;
use crate::field::{Field, Jet};
use crate::geodesic::{self, metric_ball_with_extent};
use crate::metric::{ChristoffelField, DerivativeMode, MetricChart};
use crate::Error;

/// Smallest singular value of `∂u` accepted for an immersion.
pub const RANK_THRESHOLD: f64 = 1e-8;

#[derive(Clone)]
pub struct MapModel {
    pub name: String,
    pub source: Arc<MetricChart>,
    pub target: Arc<MetricChart>,
    pub components: Vec<Field>,
    pub lipschitz: Extended,
    /// Derivative mode for the components; defaults to the source chart's.
    pub mode: Option<DerivativeMode>,
}

impl std::fmt::Debug for MapModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MapModel")
            .field("name", &self.name)
            .field("source", &self.source.name)
            .field("target", &self.target.name)
            .field("components", &self.components)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// Where the target Christoffel symbols at `u(x)` come from.
#[derive(Clone, Copy)]
pub enum TargetGamma<'a> {
    /// Evaluate the target chart's Christoffel symbols at `u(x)`.
    Pointwise,
    /// Multilinear interpolation of a sampled field.
    Interpolated(&'a ChristoffelField),
}

impl MapModel {
    pub fn new(
        name: impl Into<String>,
        source: Arc<MetricChart>,
        target: Arc<MetricChart>,
        components: Vec<Field>,
        lipschitz: Extended,
    ) -> Result<Self, Error> {
        if components.len() != target.dim() {
            return Err(Error::DimensionMismatch { expected: target.dim(), found: components.len() });
        }
        Ok(MapModel { name: name.into(), source, target, components, lipschitz, mode: None })
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = Some(mode);
        self
    }

    /// Same map with the source chart replaced (e.g. on a refined grid).
    pub fn with_source(&self, source: Arc<MetricChart>) -> Self {
        MapModel { source, ..self.clone() }
    }

    pub fn m(&self) -> usize {
        self.source.dim()
    }

    pub fn n(&self) -> usize {
        self.target.dim()
    }

    pub fn mode(&self) -> &DerivativeMode {
        self.mode.as_ref().unwrap_or(&self.source.mode)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.value(x)).collect()
    }

    /// `u(x)`, checked to lie in the target box.
    pub fn image(&self, x: &[f64]) -> Result<Vec<f64>, Error> {
        let u = self.eval(x);
        if u.iter().any(|v| !v.is_finite()) || !self.target.bounds.contains_with_slack(&u, 1e-6) {
            return Err(Error::TargetEscape { point: x.to_vec(), image: u });
        }
        Ok(u)
    }

    /// Checks that every source node maps into the target box.
    pub fn check_containment(&self) -> Result<(), Error> {
        for x in self.source.bounds.points() {
            self.image(&x)?;
        }
        Ok(())
    }

    fn jets(&self, x: &[f64]) -> Result<Vec<Jet>, Error> {
        self.components
            .iter()
            .map(|c| self.mode().jet(c.as_ref(), x, &self.source.bounds))
            .collect()
    }

    /// `∂_i u^α` (rows α, columns i) and `|du|` at every source node.
    pub fn differential(&self) -> Result<Vec<(DMatrix<f64>, f64)>, Error> {
        let (m, n) = (self.m(), self.n());
        self.source
            .bounds
            .points()
            .map(|x| {
                let u = self.image(&x)?;
                let mut du = DMatrix::zeros(n, m);
                for (a, c) in self.components.iter().enumerate() {
                    let g = self.mode().gradient(c.as_ref(), &x, &self.source.bounds)?;
                    for i in 0..m {
                        du[(a, i)] = g[i];
                    }
                }
                let s = self.source.metric_at(&x)?;
                let h = self.target.matrix(&u);
                Ok((du.clone(), du_norm(&du, &s.ginv, &h)))
            })
            .collect()
    }

    /// Generalized Hessian and Laplacian at every source node.
    pub fn generalized_hessian(&self, target_gamma: TargetGamma) -> Result<JetField, Error> {
        let nodes: Vec<usize> = (0..self.source.bounds.len()).collect();
        self.jet_field(&nodes, target_gamma)
    }

    /// Generalized Hessian at the given source nodes.
    pub fn jet_field(&self, nodes: &[usize], target_gamma: TargetGamma) -> Result<JetField, Error> {
        let mut out = Vec::with_capacity(nodes.len());
        for &idx in nodes {
            let x = self.source.bounds.point(idx);
            out.push(self.node_jet(idx, &x, target_gamma)?);
        }
        Ok(JetField {
            m: self.m(),
            n: self.n(),
            nodes: out,
            interpolated_target: matches!(target_gamma, TargetGamma::Interpolated(_)),
        })
    }

    /// Jet data at an arbitrary source point (index is informational).
    pub fn node_jet(&self, index: usize, x: &[f64], target_gamma: TargetGamma) -> Result<NodeJet, Error> {
        let (m, n) = (self.m(), self.n());
        let u = self.image(x)?;
        let s = self.source.metric_at(x)?;
        let gamma_m = self.source.christoffel_at(x)?;
        let gamma_n = match target_gamma {
            TargetGamma::Pointwise => self.target.christoffel_at(&u)?,
            TargetGamma::Interpolated(f) => f
                .interpolate(&u)
                .ok_or_else(|| Error::TargetEscape { point: x.to_vec(), image: u.clone() })?,
        };
        let h = self.target.matrix(&u);
        let jets = self.jets(x)?;
        let mut du = DMatrix::zeros(n, m);
        for a in 0..n {
            for i in 0..m {
                du[(a, i)] = jets[a].gradient[i];
            }
        }
        let gm = |l: usize, i: usize, j: usize| gamma_m[(l * m + i) * m + j];
        let gn = |a: usize, b: usize, c: usize| gamma_n[(a * n + b) * n + c];
        let mut second = Vec::with_capacity(n);
        let mut component_hess = Vec::with_capacity(n);
        let mut nonlinear = Vec::with_capacity(n);
        let mut hess = Vec::with_capacity(n);
        for a in 0..n {
            let d2 = DMatrix::from_fn(m, m, |i, j| 0.5 * (jets[a].second(i, j) + jets[a].second(j, i)));
            let ch = DMatrix::from_fn(m, m, |i, j| {
                d2[(i, j)] - (0..m).map(|l| gm(l, i, j) * du[(a, l)]).sum::<f64>()
            });
            let t = DMatrix::from_fn(m, m, |i, j| {
                let mut s = 0.0;
                for b in 0..n {
                    for c in 0..n {
                        s += gn(a, b, c) * du[(b, i)] * du[(c, j)];
                    }
                }
                s
            });
            hess.push(&ch + &t);
            second.push(d2);
            component_hess.push(ch);
            nonlinear.push(t);
        }
        let ginv = &s.ginv;
        // trace route
        let laplacian: Vec<f64> = hess
            .iter()
            .map(|hm| {
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        s += ginv[(i, j)] * hm[(i, j)];
                    }
                }
                s
            })
            .collect();
        // contract-first route: g^{ij}∂_ij u^α − (g^{ij}Γ^l_ij)∂_l u^α + Γ^α_βγ (g^{ij}∂_i u^β ∂_j u^γ)
        let contracted_gamma: Vec<f64> = (0..m)
            .map(|l| {
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        s += ginv[(i, j)] * gm(l, i, j);
                    }
                }
                s
            })
            .collect();
        let energy = DMatrix::from_fn(n, n, |b, c| {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += ginv[(i, j)] * du[(b, i)] * du[(c, j)];
                }
            }
            s
        });
        let laplacian_decomposed: Vec<f64> = (0..n)
            .map(|a| {
                let mut lap = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        lap += ginv[(i, j)] * second[a][(i, j)];
                    }
                }
                for l in 0..m {
                    lap -= contracted_gamma[l] * du[(a, l)];
                }
                let mut tension = 0.0;
                for b in 0..n {
                    for c in 0..n {
                        tension += gn(a, b, c) * energy[(b, c)];
                    }
                }
                lap + tension
            })
            .collect();

        let du_norm = du_norm(&du, ginv, &h);
        let hess_norm = hess_norm(&hess, ginv, &h);
        let laplacian_norm = vec_norm(&laplacian, &h);
        let du_hs = du.norm();
        let hess_hs_sum: f64 = component_hess.iter().map(|c| (ginv * c).norm()).sum();
        let t_hs_sum: f64 = nonlinear.iter().map(|t| (ginv * t).norm()).sum();
        let denom = hess_hs_sum + t_hs_sum;
        let b = if hess_norm == 0.0 {
            0.0
        } else if denom == 0.0 {
            f64::INFINITY
        } else {
            hess_norm / denom
        };
        Ok(NodeJet {
            index,
            point: x.to_vec(),
            u,
            du,
            second,
            component_hess,
            nonlinear,
            hess,
            laplacian,
            laplacian_decomposed,
            ginv: s.ginv,
            vol_density: s.vol_density,
            h,
            du_norm,
            hess_norm,
            laplacian_norm,
            du_hs,
            hess_hs_sum,
            t_hs_sum,
            b,
            harmonicity_defect: contracted_gamma.iter().fold(0.0, |a, v| a.max(v.abs())),
        })
    }

    /// Pullback metric, isometry and normality defects at every source node.
    pub fn immersion_check(&self) -> Result<ImmersionData, Error> {
        let jf = self.generalized_hessian(TargetGamma::Pointwise)?;
        immersion_data(&jf, &self.source)
    }

    /// Largest sampled `|du(v)|_h / |v|_g` over nodes (local Lipschitz
    /// constant) combined with seeded random node pairs.
    pub fn lipschitz_estimate(&self, random_pairs: usize, seed: u64) -> Result<f64, Error> {
        let mut best = 0.0f64;
        for (k, (du, _)) in self.differential()?.into_iter().enumerate() {
            let x = self.source.bounds.point(k);
            let u = self.image(&x)?;
            let g = self.source.matrix(&x);
            let h = self.target.matrix(&u);
            let a = du.transpose() * h * du;
            let ev = crate::metric::relative_eigenvalues(&a, &g);
            best = best.max(ev.iter().copied().fold(0.0, f64::max).sqrt());
        }
        let len = self.source.bounds.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx: Vec<usize> = (0..len).collect();
        for _ in 0..random_pairs {
            let pair: Vec<&usize> = idx.choose_multiple(&mut rng, 2).collect();
            let (x, y) = (self.source.bounds.point(*pair[0]), self.source.bounds.point(*pair[1]));
            let dm = geodesic::geodesic_distance(&self.source, &x, &y)?.value;
            let dn = geodesic::geodesic_distance(&self.target, &self.image(&x)?, &self.image(&y)?)?.value;
            if dm > 0.0 {
                best = best.max(dn / dm);
            }
        }
        Ok(best)
    }

    /// Checks the declared Lipschitz bound against [`Self::lipschitz_estimate`].
    pub fn check_lipschitz(&self, tol: f64, seed: u64) -> Result<f64, Error> {
        let est = self.lipschitz_estimate(16, seed)?;
        if let Extended::Finite(bound) = self.lipschitz {
            if est > bound * (1.0 + tol) {
                return Err(Error::LipschitzViolation {
                    bound,
                    ratio: est,
                    x: vec![],
                    y: vec![],
                });
            }
        }
        Ok(est)
    }

    /// Smallest sampled `R` with `u(B_r(x̄)) ⊆ B_R(u(x̄))` over centers taken
    /// every `stride` nodes along each axis.
    pub fn uniform_continuity_profile(&self, r: f64, stride: usize) -> Result<f64, Error> {
        let b = &self.source.bounds;
        let extent = geodesic::ball_extent(&self.source, r)?;
        let stride = stride.max(1);
        let mut best = 0.0f64;
        for c in 0..b.len() {
            if b.multi_index(c).iter().any(|i| i % stride != 0) {
                continue;
            }
            let center = b.point(c);
            let uc = self.image(&center)?;
            let ball = metric_ball_with_extent(&self.source, &center, r, &extent)?;
            for &i in &ball.members {
                let ui = self.image(&b.point(i))?;
                best = best.max(geodesic::geodesic_distance(&self.target, &uc, &ui)?.value);
            }
        }
        Ok(best)
    }
}

pub fn du_norm(du: &DMatrix<f64>, ginv: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    // g^{ij} h_αβ ∂_i u^α ∂_j u^β = tr(G⁻¹ duᵀ H du)
    let a = du.transpose() * h * du;
    (ginv.component_mul(&a).sum()).max(0.0).sqrt()
}

pub fn hess_norm(hess: &[DMatrix<f64>], ginv: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    let n = hess.len();
    let mut s = 0.0;
    for a in 0..n {
        let ga = ginv * &hess[a] * ginv;
        for b in 0..n {
            if h[(a, b)] != 0.0 {
                s += h[(a, b)] * ga.component_mul(&hess[b]).sum();
            }
        }
    }
    s.max(0.0).sqrt()
}

pub fn vec_norm(v: &[f64], h: &DMatrix<f64>) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            s += h[(a, b)] * v[a] * v[b];
        }
    }
    s.max(0.0).sqrt()
}

/// Jet data at one source node.
#[derive(Clone, Debug)]
pub struct NodeJet {
    pub index: usize,
    pub point: Vec<f64>,
    pub u: Vec<f64>,
    /// `∂_i u^α`, rows α.
    pub du: DMatrix<f64>,
    /// `∂_i∂_j u^α` per α.
    pub second: Vec<DMatrix<f64>>,
    /// `∂_i∂_j u^α − ^MΓ^l_ij ∂_l u^α` per α.
    pub component_hess: Vec<DMatrix<f64>>,
    /// `T^α_ij = ^NΓ^α_βγ(u) ∂_i u^β ∂_j u^γ`.
    pub nonlinear: Vec<DMatrix<f64>>,
    pub hess: Vec<DMatrix<f64>>,
    /// `g^{ij}(Hess u)^α_ij`.
    pub laplacian: Vec<f64>,
    /// The same quantity assembled from contracted pieces.
    pub laplacian_decomposed: Vec<f64>,
    pub ginv: DMatrix<f64>,
    pub vol_density: f64,
    /// Target metric at `u(x)`.
    pub h: DMatrix<f64>,
    pub du_norm: f64,
    pub hess_norm: f64,
    pub laplacian_norm: f64,
    /// `|∂u|_HS`.
    pub du_hs: f64,
    /// `Σ_α |G⁻¹ Hess(u^α)|_HS`.
    pub hess_hs_sum: f64,
    /// `Σ_α |G⁻¹ T^α|_HS`.
    pub t_hs_sum: f64,
    /// `|Hess u| / (hess_hs_sum + t_hs_sum)`, 0 when the Hessian vanishes.
    pub b: f64,
    /// `max_l |g^{ij} Γ^l_ij|`; zero exactly when the chart coordinates are harmonic.
    pub harmonicity_defect: f64,
}

/// Jet data at a set of source nodes.
#[derive(Clone, Debug)]
pub struct JetField {
    pub m: usize,
    pub n: usize,
    pub nodes: Vec<NodeJet>,
    pub interpolated_target: bool,
}

impl JetField {
    /// `max |trace route − decomposition route|` over nodes and components.
    pub fn trace_identity_defect(&self) -> f64 {
        self.nodes
            .iter()
            .flat_map(|nj| nj.laplacian.iter().zip(&nj.laplacian_decomposed).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest asymmetry `|H_ij − H_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for nj in &self.nodes {
            for hm in &nj.hess {
                worst = worst.max((hm - hm.transpose()).abs().max());
            }
        }
        worst
    }

    /// Largest pointwise `b` (see [`NodeJet::b`]).
    pub fn max_b(&self) -> f64 {
        self.nodes.iter().map(|n| n.b).fold(0.0, f64::max)
    }

    pub fn hess_norms(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.hess_norm).collect()
    }

    pub fn laplacian_norms(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.laplacian_norm).collect()
    }

    pub fn du_norms(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.du_norm).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ImmersionData {
    /// `(ψ*h)_ij` per node, row-major.
    pub pullback: Vec<Vec<f64>>,
    pub isometry_defect: f64,
    /// `max_{ijk} |h(Hess_ij, ∂_k ψ)|` per node.
    pub normality_defect: Vec<f64>,
    pub max_normality_defect: f64,
    pub min_singular_value: f64,
    /// `|II|` per node (the generalized Hessian norm).
    pub second_fundamental_form: Vec<f64>,
    /// `|H|` per node (the generalized Laplacian norm).
    pub mean_curvature: Vec<f64>,
}

pub fn immersion_data(jf: &JetField, source: &MetricChart) -> Result<ImmersionData, Error> {
    let (m, n) = (jf.m, jf.n);
    let mut pullback = Vec::with_capacity(jf.nodes.len());
    let mut isometry_defect = 0.0f64;
    let mut normality_defect = Vec::with_capacity(jf.nodes.len());
    let mut min_sv = f64::INFINITY;
    for nj in &jf.nodes {
        let sv = nj.du.clone().svd(false, false).singular_values;
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if m > n || !(smin >= RANK_THRESHOLD) {
            return Err(Error::NotImmersion { point: nj.point.clone(), singular_value: smin });
        }
        min_sv = min_sv.min(smin);
        let pb = nj.du.transpose() * &nj.h * &nj.du;
        let g = source.matrix(&nj.point);
        isometry_defect = isometry_defect.max((&pb - g).abs().max());
        pullback.push(pb.transpose().iter().copied().collect());
        // h(Hess_ij, ∂_k ψ) = h_αβ H^α_ij ∂_k u^β
        let hdu = &nj.h * &nj.du; // (α, k) = h_αβ ∂_k u^β
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let s: f64 = (0..n).map(|a| nj.hess[a][(i, j)] * hdu[(a, k)]).sum();
                    worst = worst.max(s.abs());
                }
            }
        }
        normality_defect.push(worst);
    }
    Ok(ImmersionData {
        pullback,
        isometry_defect,
        max_normality_defect: normality_defect.iter().copied().fold(0.0, f64::max),
        normality_defect,
        min_singular_value: min_sv,
        second_fundamental_form: jf.hess_norms(),
        mean_curvature: jf.laplacian_norms(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field;
    use crate::fixtures;

    fn flat_map(exprs: &[&str], m: usize, n: usize) -> MapModel {
        let vars = ["x", "y", "z"];
        let src = Arc::new(fixtures::flat_chart(m, -1.0, 1.0, 9));
        let tgt = Arc::new(fixtures::flat_chart(n, -10.0, 10.0, 5));
        let comps = exprs.iter().map(|e| field::expr(e, &vars[..m]).unwrap()).collect();
        MapModel::new("test", src, tgt, comps, Extended::Infinite).unwrap()
    }

    #[test]
    fn differential_examples() {
        let id = flat_map(&["x", "y"], 2, 2);
        for (du, norm) in id.differential().unwrap() {
            assert_eq!(du, DMatrix::identity(2, 2));
            assert!((norm - 2f64.sqrt()).abs() < 1e-15);
        }
        let c = flat_map(&["0.5", "0.25"], 2, 2);
        assert!(c.differential().unwrap().iter().all(|(du, n)| du.max() == 0.0 && *n == 0.0));
        let s = flat_map(&["2*x", "y"], 2, 2);
        assert!(s.differential().unwrap().iter().all(|(_, n)| (n * n - 5.0).abs() < 1e-12));
    }

    #[test]
    fn hessian_examples() {
        let affine = flat_map(&["2*x - y + 1", "x + 3*y"], 2, 2);
        let jf = affine.generalized_hessian(TargetGamma::Pointwise).unwrap();
        assert!(jf.nodes.iter().all(|n| n.hess_norm == 0.0 && n.laplacian_norm == 0.0));

        let sq = flat_map(&["x^2"], 2, 1);
        let jf = sq.generalized_hessian(TargetGamma::Pointwise).unwrap();
        for n in &jf.nodes {
            assert!((n.hess[0].clone() - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0])).abs().max() < 1e-12);
            assert!((n.hess_norm - 2.0).abs() < 1e-12);
        }

        let lap = flat_map(&["x^2 + y^2", "x*y"], 2, 2);
        let jf = lap.generalized_hessian(TargetGamma::Pointwise).unwrap();
        for n in &jf.nodes {
            assert!((n.laplacian[0] - 4.0).abs() < 1e-10);
            assert!(n.laplacian[1].abs() < 1e-10);
        }
        assert!(jf.trace_identity_defect() < 1e-12);
    }

    #[test]
    fn constant_metric_contraction() {
        let src = Arc::new(fixtures::conformal_chart(2, 4.0, -1.0, 1.0, 9));
        let tgt = Arc::new(fixtures::flat_chart(1, -10.0, 10.0, 5));
        let map = MapModel::new("sq", src, tgt, vec![field::expr("x^2", &["x", "y"]).unwrap()], Extended::Infinite)
            .unwrap();
        let jf = map.generalized_hessian(TargetGamma::Pointwise).unwrap();
        assert!(jf.nodes.iter().all(|n| (n.hess_norm - 0.5).abs() < 1e-12));
    }

    #[test]
    fn flat_target_reduces_to_component_hessians() {
        let sphere = fixtures::sphere_immersion(1.0, 17, DerivativeMode::fd());
        let jf = sphere.generalized_hessian(TargetGamma::Pointwise).unwrap();
        for n in &jf.nodes {
            for a in 0..3 {
                assert_eq!(n.hess[a], n.component_hess[a]);
                assert_eq!(n.nonlinear[a].max(), 0.0);
            }
        }
        assert!(jf.symmetry_defect() == 0.0);
        assert!(jf.trace_identity_defect() < 1e-10);
        assert!(jf.max_b().is_finite());
    }

    #[test]
    fn curved_target_terms_and_interpolation() {
        let map = fixtures::flat_to_hyperbolic(17, DerivativeMode::Analytic);
        let pointwise = map.generalized_hessian(TargetGamma::Pointwise).unwrap();
        let cf = map.target.christoffel().unwrap();
        let interp = map.generalized_hessian(TargetGamma::Interpolated(&cf)).unwrap();
        assert!(pointwise.nodes.iter().any(|n| n.nonlinear.iter().any(|t| t.abs().max() > 1e-3)));
        let mut worst = 0.0f64;
        for (a, b) in pointwise.nodes.iter().zip(&interp.nodes) {
            worst = worst.max((a.hess_norm - b.hess_norm).abs());
        }
        assert!(worst < 1e-2, "{worst}");
        assert!(pointwise.trace_identity_defect() < 1e-10);
    }

    #[test]
    fn immersion_examples() {
        let plane = fixtures::flat_plane_graph(9);
        let d = plane.immersion_check().unwrap();
        assert_eq!(d.isometry_defect, 0.0);
        assert!(d.second_fundamental_form.iter().all(|v| *v == 0.0));

        let cyl = fixtures::cylinder_immersion(33, DerivativeMode::Analytic);
        let d = cyl.immersion_check().unwrap();
        assert!(d.isometry_defect < 1e-14);
        assert!(d.second_fundamental_form.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(d.mean_curvature.iter().all(|v| (v - 1.0).abs() < 1e-12));

        let degenerate = flat_map(&["x", "x", "0"], 2, 3);
        assert!(matches!(degenerate.immersion_check(), Err(Error::NotImmersion { .. })));
    }

    #[test]
    fn target_escape_names_the_point() {
        let m = flat_map(&["20*x", "y"], 2, 2);
        match m.differential() {
            Err(Error::TargetEscape { point, .. }) => assert!(point[0].abs() > 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn continuity_profile() {
        let b = crate::grid::CoordinateBox::uniform(vec![0.0], vec![1.0], 21).unwrap();
        let src = Arc::new(MetricChart::euclidean("I", b).unwrap());
        let tgt = Arc::new(fixtures::flat_chart(1, -3.0, 3.0, 5));
        let mk = |e: &str| {
            MapModel::new("u", src.clone(), tgt.clone(), vec![field::expr(e, &["x"]).unwrap()], Extended::Finite(2.0))
                .unwrap()
        };
        let r = 0.2;
        assert!((mk("x").uniform_continuity_profile(r, 1).unwrap() - r).abs() < 1e-12);
        assert_eq!(mk("0.3").uniform_continuity_profile(r, 1).unwrap(), 0.0);
        assert!((mk("2*x").uniform_continuity_profile(r, 1).unwrap() - 2.0 * r).abs() < 1e-12);
        assert!((mk("2*x").lipschitz_estimate(8, 1).unwrap() - 2.0).abs() < 1e-9);
        assert!(mk("3*x").check_lipschitz(1e-6, 1).is_err());
    }
}
