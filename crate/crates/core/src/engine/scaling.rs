//! The scaled interior estimate for `P = a^{ij}∂_i∂_j` on Euclidean balls.
//!
//! With `ũ(x) = u(sx)` and `ã(x) = a(sx)`, the rescaled operator satisfies
//! `P̃ũ = s²(Pu)∼` and `‖f∼‖_{L^q(B₂)} = s^{−m/q}‖f‖_{L^q(B_{2s})}`, which
//! moves the estimate on `B_{2s}` to the unit scale.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::field::{self, Field, Jet};
use crate::grid::CoordinateBox;
use crate::lp::{check_exponent, holder_of_samples, Quadrature};
use crate::metric::DerivativeMode;
use crate::Error;

#[derive(Clone, Debug)]
pub struct EllipticOperatorSpec {
    pub s: f64,
    pub q: f64,
    /// `a^{ij}`, full symmetric matrix of fields.
    pub coefficients: Vec<Vec<Field>>,
    pub lambda: f64,
    pub alpha: f64,
    pub mode: DerivativeMode,
    /// Grid nodes per axis on the sampling boxes.
    pub resolution: usize,
    pub seed: u64,
}

impl EllipticOperatorSpec {
    /// `Δ` in `m` dimensions.
    pub fn laplacian(m: usize, s: f64, q: f64) -> Self {
        let coefficients = (0..m)
            .map(|i| (0..m).map(|j| field::constant(if i == j { 1.0 } else { 0.0 })).collect())
            .collect();
        EllipticOperatorSpec {
            s,
            q,
            coefficients,
            lambda: 1.0,
            alpha: 0.5,
            mode: DerivativeMode::Analytic,
            resolution: 33,
            seed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    fn validate(&self) -> Result<(), Error> {
        check_exponent(self.q)?;
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(Error::InvalidArgument(format!("scale s must lie in (0, 1], got {}", self.s)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("Hölder exponent must lie in (0, 1], got {}", self.alpha)));
        }
        let m = self.dim();
        if m == 0 || self.coefficients.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, found: self.coefficients.first().map_or(0, |r| r.len()) });
        }
        Ok(())
    }

    fn coefficient_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_fn(m, m, |i, j| self.coefficients[i][j].value(x))
    }

    /// Coefficients of the rescaled operator `ã(x) = a(sx)`.
    pub fn rescaled_coefficients(&self) -> Vec<Vec<Field>> {
        self.coefficients
            .iter()
            .map(|row| row.iter().map(|a| field::rescaled(a, self.s)).collect())
            .collect()
    }

    /// Grid on `[−R, R]^m`.
    fn ball_grid(&self, radius: f64) -> Result<CoordinateBox, Error> {
        let m = self.dim();
        CoordinateBox::uniform(vec![-radius; m], vec![radius; m], self.resolution)
    }
}

fn ball_mask(grid: &CoordinateBox, radius: f64) -> Vec<bool> {
    grid.points()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>() <= radius * radius * (1.0 + 1e-12))
        .collect()
}

fn apply_operator(a: &DMatrix<f64>, jet: &Jet) -> f64 {
    let m = a.nrows();
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            s += a[(i, j)] * jet.second(i, j);
        }
    }
    s
}

fn hessian_norm(jet: &Jet) -> f64 {
    jet.hessian.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn gradient_norm(jet: &Jet) -> f64 {
    jet.gradient.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    /// Smallest eigenvalue of `(a^{ij})` over `B_{2s}`.
    pub min_eigenvalue: f64,
    /// `max_ij sup |a^{ij}|` over `B_{2s}`.
    pub sup_coefficient: f64,
    /// `max_ij [a^{ij}]_α` over `B_{2s}`.
    pub holder: f64,
    /// `max_ij [ã^{ij}]_α` over `B₂`.
    pub rescaled_holder: f64,
}

/// Checks ellipticity `a ≥ ½`, `sup|a| ≤ Λ` and `[a]_α ≤ Λ s^{−α}` on
/// `B_{2s}`, and the transferred bound `[ã]_α ≤ Λ` on `B₂`.
pub fn check_hypotheses(spec: &EllipticOperatorSpec) -> Result<HypothesisReport, Error> {
    spec.validate()?;
    let m = spec.dim();
    let s = spec.s;
    let grid = spec.ball_grid(2.0 * s)?;
    let mask = ball_mask(&grid, 2.0 * s);
    let pts: Vec<Vec<f64>> = grid.points().zip(&mask).filter(|(_, &k)| k).map(|(x, _)| x).collect();
    let mut min_ev = f64::INFINITY;
    let mut sup = 0.0f64;
    for x in &pts {
        let a = spec.coefficient_matrix(x);
        for i in 0..m {
            for j in 0..m {
                if a[(i, j)] != a[(j, i)] {
                    return Err(Error::SymmetryViolation { i, j, point: x.clone() });
                }
            }
        }
        let ev = a.clone().symmetric_eigenvalues();
        min_ev = min_ev.min(ev.min());
        sup = sup.max(a.abs().max());
    }
    let tilde_pts: Vec<Vec<f64>> = pts.iter().map(|x| x.iter().map(|v| v / s).collect()).collect();
    let mut holder = 0.0f64;
    let mut rescaled_holder = 0.0f64;
    let tilde = spec.rescaled_coefficients();
    for i in 0..m {
        for j in i..m {
            let vals: Vec<f64> = pts.iter().map(|x| spec.coefficients[i][j].value(x)).collect();
            holder = holder.max(holder_of_samples(&pts, &vals, spec.alpha, spec.seed));
            let tvals: Vec<f64> = tilde_pts.iter().map(|x| tilde[i][j].value(x)).collect();
            rescaled_holder = rescaled_holder.max(holder_of_samples(&tilde_pts, &tvals, spec.alpha, spec.seed));
        }
    }
    let report = HypothesisReport { min_eigenvalue: min_ev, sup_coefficient: sup, holder, rescaled_holder };
    if min_ev < 0.5 {
        return Err(Error::HypothesisFailed(format!(
            "ellipticity: smallest eigenvalue of a is {min_ev} < 1/2"
        )));
    }
    if sup > spec.lambda {
        return Err(Error::HypothesisFailed(format!("sup bound: max |a^ij| = {sup} > Lambda = {}", spec.lambda)));
    }
    let bound = spec.lambda * s.powf(-spec.alpha);
    if holder > bound * (1.0 + 1e-12) {
        return Err(Error::HypothesisFailed(format!(
            "Hölder bound: [a^ij]_alpha = {holder} > Lambda s^-alpha = {bound}"
        )));
    }
    if rescaled_holder > spec.lambda * (1.0 + 1e-9) {
        return Err(Error::HypothesisFailed(format!(
            "rescaled Hölder bound: [ã^ij]_alpha = {rescaled_holder} > Lambda = {}",
            spec.lambda
        )));
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    /// `max |∂_i ũ(x) − s ∂_i u(sx)|` relative to `max(1, |s ∂_i u|)`.
    pub gradient_defect: f64,
    pub hessian_defect: f64,
    /// `P̃ũ = s²(Pu)∼`.
    pub operator_defect: f64,
    /// Largest relative defect of `‖f∼‖_{L^q(B₂)} = s^{−m/q}‖f‖_{L^q(B_{2s})}`
    /// over `f ∈ {u, |∇u|, |∂²u|, Pu}`.
    pub norm_defect: f64,
    pub hypotheses: HypothesisReport,
    pub samples: usize,
}

impl ScalingReport {
    pub fn max_defect(&self) -> f64 {
        self.gradient_defect
            .max(self.hessian_defect)
            .max(self.operator_defect)
            .max(self.norm_defect)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Checks the pointwise and integral scaling identities at the nodes of `B₂`.
pub fn verify_scaling_identities(spec: &EllipticOperatorSpec, u: &Field) -> Result<ScalingReport, Error> {
    let hypotheses = check_hypotheses(spec)?;
    let (m, s, q) = (spec.dim(), spec.s, spec.q);
    let unit = spec.ball_grid(2.0)?;
    let small = spec.ball_grid(2.0 * s)?;
    let mask = ball_mask(&unit, 2.0);
    let u_t = field::rescaled(u, s);
    let a_t = spec.rescaled_coefficients();
    let (mut gd, mut hd, mut od) = (0.0f64, 0.0f64, 0.0f64);
    // f∼ on B₂ (built from tilde quantities) and f on B_{2s}
    let mut tilde_fields = vec![vec![0.0; unit.len()]; 4];
    let mut plain_fields = vec![vec![0.0; small.len()]; 4];
    let mut samples = 0;
    for i in 0..unit.len() {
        if !mask[i] {
            continue;
        }
        samples += 1;
        let x = unit.point(i);
        let y = small.point(i);
        let jt = spec.mode.jet(u_t.as_ref(), &x, &unit)?;
        let j = spec.mode.jet(u.as_ref(), &y, &small)?;
        for k in 0..m {
            gd = gd.max(rel(jt.gradient[k], s * j.gradient[k]));
        }
        for (a, b) in jt.hessian.iter().zip(&j.hessian) {
            hd = hd.max(rel(*a, s * s * b));
        }
        let at = DMatrix::from_fn(m, m, |a, b| a_t[a][b].value(&x));
        let p_t = apply_operator(&at, &jt);
        let p = apply_operator(&spec.coefficient_matrix(&y), &j);
        od = od.max(rel(p_t, s * s * p));
        tilde_fields[0][i] = jt.value;
        tilde_fields[1][i] = gradient_norm(&jt) / s;
        tilde_fields[2][i] = hessian_norm(&jt) / (s * s);
        tilde_fields[3][i] = p_t / (s * s);
        plain_fields[0][i] = j.value;
        plain_fields[1][i] = gradient_norm(&j);
        plain_fields[2][i] = hessian_norm(&j);
        plain_fields[3][i] = p;
    }
    let qu = Quadrature::from_weights((0..unit.len()).map(|i| unit.node_weight(i)).collect());
    let qs = Quadrature::from_weights((0..small.len()).map(|i| small.node_weight(i)).collect());
    let mut nd = 0.0f64;
    for (ft, f) in tilde_fields.iter().zip(&plain_fields) {
        let lhs = qu.norm(ft, Some(&mask), q)?;
        let rhs = s.powf(-(m as f64) / q) * qs.norm(f, Some(&mask), q)?;
        nd = nd.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    Ok(ScalingReport {
        gradient_defect: gd,
        hessian_defect: hd,
        operator_defect: od,
        norm_defect: nd,
        hypotheses,
        samples,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InteriorEstimate {
    /// `‖u‖ + ‖|∇u|‖ + ‖|∂²u|‖` in `L^q(B_s)`.
    pub lhs: f64,
    /// `‖Pu‖_{L^q(B_{2s})} + s⁻²‖u‖_{L^q(B_{2s})}`.
    pub rhs: f64,
    pub ratio: f64,
}

pub fn verify_interior_estimate(spec: &EllipticOperatorSpec, u: &Field) -> Result<InteriorEstimate, Error> {
    check_hypotheses(spec)?;
    let (s, q) = (spec.s, spec.q);
    let grid = spec.ball_grid(2.0 * s)?;
    let inner = ball_mask(&grid, s);
    let outer = ball_mask(&grid, 2.0 * s);
    let n = grid.len();
    let (mut val, mut grad, mut hess, mut op) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        if !outer[i] {
            continue;
        }
        let x = grid.point(i);
        let j = spec.mode.jet(u.as_ref(), &x, &grid)?;
        val[i] = j.value;
        grad[i] = gradient_norm(&j);
        hess[i] = hessian_norm(&j);
        op[i] = apply_operator(&spec.coefficient_matrix(&x), &j);
    }
    let quad = Quadrature::from_weights((0..n).map(|i| grid.node_weight(i)).collect());
    let lhs = quad.norm(&val, Some(&inner), q)? + quad.norm(&grad, Some(&inner), q)? + quad.norm(&hess, Some(&inner), q)?;
    let rhs = quad.norm(&op, Some(&outer), q)? + quad.norm(&val, Some(&outer), q)? / (s * s);
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(InteriorEstimate { lhs, rhs, ratio })
}

/// Largest interior-estimate ratio over a family of functions.
pub fn empirical_constant(spec: &EllipticOperatorSpec, family: &[Field]) -> Result<f64, Error> {
    let mut c = 0.0f64;
    for u in family {
        c = c.max(verify_interior_estimate(spec, u)?.ratio);
    }
    Ok(c)
}
