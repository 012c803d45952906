//! Estimates for isometric immersions: the Euclidean-target form
//! `‖II‖_p ≲ 1 + ‖H‖_p + ‖dist(ψ, 0)‖_p` and the general-target form
//! `‖II‖_p ≲ ‖H‖_p + vol(M)^{1/p}(r⁻¹ + r₁(N)⁻¹ + r⁻² diam_N ψ(M))`.

use serde::Serialize;

use crate::engine::Extended;
use crate::geodesic;
use crate::lp::{check_exponent, Quadrature};
use crate::map::{immersion_data, MapModel, TargetGamma};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum CorollaryMode {
    Intro,
    CorollaryA,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorollaryReport {
    pub mode: CorollaryMode,
    pub p: f64,
    pub ii_norm: f64,
    pub h_norm: f64,
    /// Intro mode: `‖dist(ψ, 0)‖_p`.
    pub dist_norm: Option<f64>,
    pub volume: f64,
    /// Corollary mode: sampled `diam_N ψ(M)` (a lower bound).
    pub diameter: Option<f64>,
    /// Corollary mode: `min(r₁(M), r₁(N), 1)`.
    pub r: Option<f64>,
    pub rhs: f64,
    pub ratio: f64,
    pub isometry_defect: f64,
    /// `max | |dψ|² − m |`.
    pub energy_defect: f64,
    pub max_normality_defect: f64,
}

/// Largest number of image points used for the diameter on curved targets.
const DIAMETER_SAMPLES: usize = 400;

fn sampled_diameter(map: &MapModel) -> Result<f64, Error> {
    let b = &map.source.bounds;
    let images: Vec<Vec<f64>> = b.points().map(|x| map.image(&x)).collect::<Result<_, _>>()?;
    let stride = if map.target.is_constant() {
        1
    } else {
        (images.len() / DIAMETER_SAMPLES).max(1)
    };
    let sample: Vec<&Vec<f64>> = images.iter().step_by(stride).collect();
    let mut best = 0.0f64;
    if let Some(g) = map.target.constant_matrix() {
        for (k, a) in sample.iter().enumerate() {
            for bb in &sample[k + 1..] {
                let d: Vec<f64> = a.iter().zip(bb.iter()).map(|(x, y)| x - y).collect();
                let mut s = 0.0;
                for i in 0..d.len() {
                    for j in 0..d.len() {
                        s += g[(i, j)] * d[i] * d[j];
                    }
                }
                best = best.max(s.sqrt());
            }
        }
    } else {
        let owned: Vec<Vec<f64>> = sample.iter().map(|v| (*v).clone()).collect();
        for (k, a) in owned.iter().enumerate() {
            let d = geodesic::distances_from(&map.target, a, &owned[k + 1..])?;
            best = d.into_iter().fold(best, f64::max);
        }
    }
    Ok(best)
}

/// `r1_source`/`r1_target` are only used in corollary mode.
pub fn verify_euclidean_corollaries(
    map: &MapModel,
    p: f64,
    mode: CorollaryMode,
    r1_source: Extended,
    r1_target: Extended,
) -> Result<CorollaryReport, Error> {
    check_exponent(p)?;
    let jf = map.generalized_hessian(TargetGamma::Pointwise)?;
    let imm = immersion_data(&jf, &map.source)?;
    let quad = Quadrature::new(&map.source, None)?;
    let ii_norm = quad.norm(&imm.second_fundamental_form, None, p)?;
    let h_norm = quad.norm(&imm.mean_curvature, None, p)?;
    let volume = quad.volume(None);
    let m = map.m() as f64;
    let energy_defect = jf.nodes.iter().map(|n| (n.du_norm * n.du_norm - m).abs()).fold(0.0, f64::max);
    let mut report = CorollaryReport {
        mode,
        p,
        ii_norm,
        h_norm,
        dist_norm: None,
        volume,
        diameter: None,
        r: None,
        rhs: 0.0,
        ratio: 0.0,
        isometry_defect: imm.isometry_defect,
        energy_defect,
        max_normality_defect: imm.max_normality_defect,
    };
    match mode {
        CorollaryMode::Intro => {
            let n = map.n();
            let euclidean = map
                .target
                .constant_matrix()
                .is_some_and(|g| (g - nalgebra::DMatrix::identity(n, n)).abs().max() == 0.0);
            if !euclidean {
                return Err(Error::InvalidArgument(format!(
                    "the Euclidean-target estimate needs a flat target chart, got '{}'",
                    map.target.name
                )));
            }
            let dist: Vec<f64> = jf.nodes.iter().map(|n| n.u.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
            let dist_norm = quad.norm(&dist, None, p)?;
            report.dist_norm = Some(dist_norm);
            report.rhs = 1.0 + h_norm + dist_norm;
        }
        CorollaryMode::CorollaryA => {
            let r = r1_source.min(r1_target).min(Extended::Finite(1.0)).value();
            let diameter = sampled_diameter(map)?;
            report.rhs = h_norm + volume.powf(1.0 / p) * (1.0 / r + r1_target.recip() + diameter / (r * r));
            report.diameter = Some(diameter);
            report.r = Some(r);
        }
    }
    report.ratio = if ii_norm == 0.0 { 0.0 } else { ii_norm / report.rhs };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::metric::DerivativeMode;

    #[test]
    fn flat_plane_has_zero_ratio() {
        let plane = fixtures::flat_plane_graph(17);
        for mode in [CorollaryMode::Intro, CorollaryMode::CorollaryA] {
            let r = verify_euclidean_corollaries(&plane, 2.0, mode, Extended::Infinite, Extended::Infinite).unwrap();
            assert_eq!((r.ii_norm, r.ratio), (0.0, 0.0));
            assert!(r.energy_defect < 1e-14);
        }
    }

    #[test]
    fn cylinder_norms_agree() {
        let cyl = fixtures::cylinder_immersion(33, DerivativeMode::Analytic);
        let r = verify_euclidean_corollaries(&cyl, 2.0, CorollaryMode::Intro, Extended::Infinite, Extended::Infinite)
            .unwrap();
        assert!((r.ii_norm - r.h_norm).abs() < 1e-10);
        assert!((r.ii_norm - r.volume.sqrt()).abs() < 1e-10);
    }
}
