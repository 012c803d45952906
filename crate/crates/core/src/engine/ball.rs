//! The local estimate on a pair of metric balls `B_r(x)`, `B_R(y)`:
//!
//! ```text
//! ‖1_{B_{r/2}} Hess u‖_p ≲ ‖1_{B_{2r}} Δu‖_p + R⁻¹‖1_{B_{2r}} du‖²_{2p}
//!                        + r⁻²‖1_{B_{2r}} dist_N(u, y)‖_p + r⁻¹‖1_{B_{2r}} du‖_p
//! ```

use serde::Serialize;

use crate::engine::Extended;
use crate::geodesic;
use crate::lp::check_exponent;
use crate::map::{MapModel, TargetGamma};
use crate::Error;

/// Pointwise norms on a set of source nodes, indexed by grid node.
#[derive(Clone, Debug)]
pub struct NodeFields {
    pub hess: Vec<f64>,
    pub laplacian: Vec<f64>,
    pub du: Vec<f64>,
    /// Quadrature weight (node weight × volume density).
    pub weight: Vec<f64>,
    pub trace_identity_defect: f64,
}

impl NodeFields {
    pub fn compute(map: &MapModel, nodes: &[usize]) -> Result<Self, Error> {
        let len = map.source.bounds.len();
        let jf = map.jet_field(nodes, TargetGamma::Pointwise)?;
        let mut f = NodeFields {
            hess: vec![0.0; len],
            laplacian: vec![0.0; len],
            du: vec![0.0; len],
            weight: vec![0.0; len],
            trace_identity_defect: jf.trace_identity_defect(),
        };
        for nj in &jf.nodes {
            let i = nj.index;
            f.hess[i] = nj.hess_norm;
            f.laplacian[i] = nj.laplacian_norm;
            f.du[i] = nj.du_norm;
            f.weight[i] = map.source.bounds.node_weight(i) * nj.vol_density;
        }
        Ok(f)
    }

    /// `∫_S |f|^p` over the listed nodes.
    pub fn integral_pow(&self, values: &[f64], nodes: &[usize], p: f64) -> f64 {
        nodes.iter().map(|&i| values[i].abs().powf(p) * self.weight[i]).sum()
    }

    pub fn norm(&self, values: &[f64], nodes: &[usize], p: f64) -> f64 {
        self.integral_pow(values, nodes, p).powf(1.0 / p)
    }

    /// `‖|du|²‖_p = (∫ |du|^{2p})^{1/p}`.
    pub fn du_sq_norm(&self, nodes: &[usize], p: f64) -> f64 {
        self.integral_pow(&self.du, nodes, 2.0 * p).powf(1.0 / p)
    }
}

/// The four right-hand terms and the left-hand side of one estimate.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Terms {
    pub lhs: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

impl Terms {
    pub fn rhs(&self) -> f64 {
        self.t1 + self.t2 + self.t3 + self.t4
    }

    /// `lhs / rhs`, zero when the left side vanishes.
    pub fn ratio(&self) -> f64 {
        if self.lhs == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs()
        }
    }
}

#[derive(Clone, Debug)]
pub struct BallInputs<'a> {
    pub map: &'a MapModel,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub r: f64,
    pub big_r: f64,
    pub p: f64,
    /// Harmonic radius of the source at `x`.
    pub source_radius: Option<Extended>,
    /// Harmonic radius of the target at `y`.
    pub target_radius: Option<Extended>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BallEstimate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub r: f64,
    pub big_r: f64,
    pub p: f64,
    /// `lhs`: `‖1_{B_{r/2}} Hess u‖_p`; `t1`: `‖1_{B_{2r}} Δu‖_p`;
    /// `t2`: `R⁻¹‖1_{B_{2r}} du‖²_{2p}`; `t3`: `r⁻²‖1_{B_{2r}} dist_N(u,y)‖_p`;
    /// `t4`: `r⁻¹‖1_{B_{2r}} du‖_p`.
    pub terms: Terms,
    pub ratio: f64,
    /// `max dist_N(u(B_r(x)), y)`, at most `R`.
    pub image_radius: f64,
    pub nodes_inner: usize,
    pub nodes_outer: usize,
    pub resolution: Vec<usize>,
    /// The outer ball reaches the chart boundary; integrals cover only its
    /// part inside the chart.
    pub truncated: bool,
}

pub fn verify_ball_estimate(inp: &BallInputs) -> Result<BallEstimate, Error> {
    check_exponent(inp.p)?;
    let map = inp.map;
    let r1m = inp
        .source_radius
        .ok_or_else(|| Error::CertificateRequired(format!("source harmonic radius at {:?}", inp.x)))?;
    let r1n = inp
        .target_radius
        .ok_or_else(|| Error::CertificateRequired(format!("target harmonic radius at {:?}", inp.y)))?;
    let limit = r1m.min(Extended::Finite(1.0)).value() / 2.0;
    if !(inp.r > 0.0 && inp.r <= limit) {
        return Err(Error::PreconditionFailed(format!(
            "r = {} must lie in (0, min(r1(M), 1)/2 = {limit}]",
            inp.r
        )));
    }
    if !(inp.big_r > 0.0 && inp.big_r < r1n.value()) {
        return Err(Error::PreconditionFailed(format!("R = {} must lie in (0, r1(N) = {r1n})", inp.big_r)));
    }
    let src = &map.source;
    let outer = geodesic::metric_ball(src, &inp.x, 2.0 * inp.r)?;
    let mid = geodesic::metric_ball(src, &inp.x, inp.r)?;
    let inner = geodesic::metric_ball(src, &inp.x, 0.5 * inp.r)?;
    let images: Vec<Vec<f64>> = outer
        .members
        .iter()
        .map(|&i| map.image(&src.bounds.point(i)))
        .collect::<Result<_, _>>()?;
    let dist = geodesic::distances_from(&map.target, &inp.y, &images)?;
    let mid_mask = mid.mask(src.bounds.len());
    let mut image_radius = 0.0f64;
    for (k, &i) in outer.members.iter().enumerate() {
        if mid_mask[i] {
            image_radius = image_radius.max(dist[k]);
            if dist[k] > inp.big_r {
                return Err(Error::PreconditionFailed(format!(
                    "u({:?}) lies at distance {} > R = {} from y",
                    src.bounds.point(i),
                    dist[k],
                    inp.big_r
                )));
            }
        }
    }
    let fields = NodeFields::compute(map, &outer.members)?;
    let mut dist_field = vec![0.0; src.bounds.len()];
    for (k, &i) in outer.members.iter().enumerate() {
        dist_field[i] = dist[k];
    }
    let p = inp.p;
    let o = &outer.members;
    let terms = Terms {
        lhs: fields.norm(&fields.hess, &inner.members, p),
        t1: fields.norm(&fields.laplacian, o, p),
        t2: fields.du_sq_norm(o, p) / inp.big_r,
        t3: fields.norm(&dist_field, o, p) / (inp.r * inp.r),
        t4: fields.norm(&fields.du, o, p) / inp.r,
    };
    Ok(BallEstimate {
        x: inp.x.clone(),
        y: inp.y.clone(),
        r: inp.r,
        big_r: inp.big_r,
        p,
        ratio: terms.ratio(),
        terms,
        image_radius,
        nodes_inner: inner.members.len(),
        nodes_outer: outer.members.len(),
        resolution: src.bounds.resolution.clone(),
        truncated: outer.truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn inputs(map: &MapModel, x: Vec<f64>, y: Vec<f64>, r: f64, big_r: f64) -> BallInputs<'_> {
        BallInputs {
            map,
            x,
            y,
            r,
            big_r,
            p: 2.0,
            source_radius: Some(Extended::Infinite),
            target_radius: Some(Extended::Infinite),
        }
    }

    #[test]
    fn affine_and_identity_maps() {
        let aff = fixtures::affine_map(33);
        let b = verify_ball_estimate(&inputs(&aff, vec![0.0, 0.0], vec![1.0, 0.0], 0.25, 5.0)).unwrap();
        assert_eq!((b.terms.lhs, b.ratio), (0.0, 0.0));
        let id = fixtures::identity_map(2, -1.0, 1.0, 33);
        let b = verify_ball_estimate(&inputs(&id, vec![0.1, 0.0], vec![0.1, 0.0], 0.2, 1.0)).unwrap();
        assert_eq!(b.terms.lhs, 0.0);
        assert!(b.terms.t4 > 0.0);
        assert_eq!(b.ratio, 0.0);
    }

    #[test]
    fn preconditions() {
        let id = fixtures::identity_map(2, -1.0, 1.0, 33);
        let mut inp = inputs(&id, vec![0.0, 0.0], vec![0.5, 0.0], 0.2, 0.3);
        assert!(matches!(verify_ball_estimate(&inp), Err(Error::PreconditionFailed(_))));
        inp.y = vec![0.0, 0.0];
        inp.source_radius = None;
        assert!(matches!(verify_ball_estimate(&inp), Err(Error::CertificateRequired(_))));
        inp.source_radius = Some(Extended::Finite(0.3));
        assert!(matches!(verify_ball_estimate(&inp), Err(Error::PreconditionFailed(_))));
        inp.source_radius = Some(Extended::Infinite);
        inp.target_radius = Some(Extended::Finite(0.3));
        assert!(matches!(verify_ball_estimate(&inp), Err(Error::PreconditionFailed(_))));
    }
}
