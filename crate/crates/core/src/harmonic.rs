//! Harmonic coordinates on metric balls and harmonic radius estimates.
//!
//! A candidate chart on `B_r(x)` solves `Δ_g φ^k = 0` with Dirichlet data
//! equal to geodesic normal coordinates at `x`, using the divergence-form
//! stencil `(1/√g) ∂_k(√g g^{kl} ∂_l ·)` on the chart grid masked to the
//! ball. The pushed metric `g^{ab}_φ = ∂_k φ^a g^{kl} ∂_l φ^b` is then tested
//! against the ellipticity sandwich `½δ ≤ (g^{ab}_φ) ≤ 2δ` and the weighted
//! derivative/Hölder bound.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::engine::Extended;
use crate::field::Field;
use crate::geodesic::{self, MetricBall};
use crate::grid::CoordinateBox;
use crate::lp::holder_of_samples;
use crate::metric::MetricChart;
use crate::Error;

#[derive(Clone, Debug)]
pub struct HarmonicOptions {
    /// Stop when the max-norm of the discrete Laplace–Beltrami residual
    /// drops below this.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Seed for subsampling Hölder pairs.
    pub seed: u64,
    /// Smallest accepted `det(Dφ) / √det g`.
    pub min_jacobian: f64,
}

impl Default for HarmonicOptions {
    fn default() -> Self {
        HarmonicOptions { tolerance: 1e-9, max_iter: 10_000, seed: 7, min_jacobian: 1e-3 }
    }
}

/// Coordinates on a grid-realized metric ball.
#[derive(Clone, Debug)]
pub struct HarmonicChartCandidate {
    pub center: Vec<f64>,
    pub radius: f64,
    pub bounds: CoordinateBox,
    /// Grid nodes of the ball.
    pub members: Vec<usize>,
    /// Members whose full 3^m neighbourhood lies in the ball.
    pub interior: Vec<bool>,
    /// `φ(p)` per member.
    pub phi: Vec<Vec<f64>>,
    /// `Dφ(p)` (rows: coordinate functions) where a stencil is available.
    pub jacobian: Vec<Option<DMatrix<f64>>>,
    /// Pushed inverse metric `g^{ab}_φ` where the Jacobian is available.
    pub pushed_metric: Vec<Option<DMatrix<f64>>>,
    /// Max-norm of the discrete Laplace–Beltrami operator on interior nodes.
    pub laplace_residual: f64,
    pub solver_iterations: usize,
    /// Range of `det(Dφ) / √det g` over members.
    pub jacobian_range: (f64, f64),
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Fails,
    ExceedsGrid,
}

#[derive(Clone, Debug, Serialize)]
pub struct RadiusCertificate {
    pub r: f64,
    pub k: usize,
    pub alpha: f64,
    pub hr1_margin: f64,
    pub hr2_value: f64,
    pub laplace_residual: f64,
    pub verdict: Verdict,
}

/// Lookup from grid node to position in `members`.
fn member_index(bounds: &CoordinateBox, members: &[usize]) -> Vec<Option<usize>> {
    let mut pos = vec![None; bounds.len()];
    for (k, &i) in members.iter().enumerate() {
        pos[i] = Some(k);
    }
    pos
}

fn interior_flags(bounds: &CoordinateBox, members: &[usize], pos: &[Option<usize>]) -> Vec<bool> {
    let offsets = bounds.neighbor_offsets();
    members
        .iter()
        .map(|&i| {
            offsets
                .iter()
                .all(|o| bounds.offset(i, o).is_some_and(|j| pos[j].is_some()))
        })
        .collect()
}

/// The derivative and Hölder terms are evaluated on the concentric ball of
/// this fraction of the radius (measured in the harmonic coordinates). The
/// discrete Dirichlet solution has a boundary layer a few grid steps wide at
/// the lattice rim whose derivatives sharpen under refinement.
pub const INNER_FRACTION: f64 = 0.75;

/// Central difference along axis `k` of member values at grid node `node`;
/// `None` unless both neighbours carry values. One-sided stencils at the
/// rim of the ball mix the Dirichlet data with the interior solution and
/// are not used.
fn ball_derivative(
    bounds: &CoordinateBox,
    pos: &[Option<usize>],
    node: usize,
    k: usize,
    value: &dyn Fn(usize) -> Option<f64>,
) -> Option<f64> {
    let m = bounds.dim();
    let h = bounds.step(k);
    let at = |d: i64| -> Option<f64> {
        let mut off = vec![0i64; m];
        off[k] = d;
        let j = bounds.offset(node, &off)?;
        value(pos[j]?)
    };
    Some((at(1)? - at(-1)?) / (2.0 * h))
}

/// `√det g · g^{kl}` at a point.
fn flux_tensor(chart: &MetricChart, x: &[f64]) -> Result<DMatrix<f64>, Error> {
    let s = crate::metric::sample_from_matrix(chart.matrix(x), x)?;
    Ok(s.ginv * s.vol_density)
}

/// Rows of the (√g-scaled) divergence-form Laplacian for each interior member:
/// `√g_i (Δφ)_i ≈ Σ_j w_ij φ_j` over grid nodes `j`.
fn assemble(chart: &MetricChart, members: &[usize], interior: &[bool]) -> Result<Vec<Vec<(usize, f64)>>, Error> {
    let b = &chart.bounds;
    let m = b.dim();
    let steps = b.steps();
    let mut rows = Vec::with_capacity(members.len());
    for (k_idx, &i) in members.iter().enumerate() {
        if !interior[k_idx] {
            rows.push(Vec::new());
            continue;
        }
        let x = b.point(i);
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(1 + 2 * m + 4 * m * m);
        let unit = |k: usize, d: i64| {
            let mut o = vec![0i64; m];
            o[k] = d;
            o
        };
        let mut diag = 0.0;
        for k in 0..m {
            let h2 = steps[k] * steps[k];
            let mut xp = x.clone();
            xp[k] += 0.5 * steps[k];
            let mut xm = x.clone();
            xm[k] -= 0.5 * steps[k];
            let ap = flux_tensor(chart, &xp)?[(k, k)];
            let am = flux_tensor(chart, &xm)?[(k, k)];
            row.push((b.offset(i, &unit(k, 1)).unwrap(), ap / h2));
            row.push((b.offset(i, &unit(k, -1)).unwrap(), am / h2));
            diag -= (ap + am) / h2;
        }
        row.push((i, diag));
        if !chart.is_constant() || chart.constant_matrix().is_some_and(|g| (0..m).any(|k| (0..m).any(|l| k != l && g[(k, l)] != 0.0))) {
            for k in 0..m {
                for l in 0..m {
                    if k == l {
                        continue;
                    }
                    let c = 1.0 / (4.0 * steps[k] * steps[l]);
                    for sk in [1i64, -1] {
                        let mut xk = x.clone();
                        xk[k] += sk as f64 * steps[k];
                        let a = flux_tensor(chart, &xk)?[(k, l)];
                        if a == 0.0 {
                            continue;
                        }
                        for sl in [1i64, -1] {
                            let mut o = vec![0i64; m];
                            o[k] = sk;
                            o[l] = sl;
                            let j = b.offset(i, &o).unwrap();
                            row.push((j, (sk * sl) as f64 * a * c));
                        }
                    }
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Jacobi-preconditioned conjugate gradients on the interior unknowns.
fn solve_dirichlet(
    rows: &[Vec<(usize, f64)>],
    members: &[usize],
    interior: &[bool],
    pos: &[Option<usize>],
    vol: &[f64],
    values: &mut [f64],
    opts: &HarmonicOptions,
) -> Result<(f64, usize), Error> {
    let unknowns: Vec<usize> = (0..members.len()).filter(|&k| interior[k]).collect();
    let n = unknowns.len();
    let mut uidx = vec![usize::MAX; members.len()];
    for (u, &k) in unknowns.iter().enumerate() {
        uidx[k] = u;
    }
    // A = -W restricted to interior, rhs = Σ_{boundary j} W_ij φ_j
    let mut a_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut rhs = vec![0.0; n];
    let mut diag = vec![0.0; n];
    for (u, &k) in unknowns.iter().enumerate() {
        let mut ar = Vec::with_capacity(rows[k].len());
        for &(j, w) in &rows[k] {
            let mj = pos[j].expect("stencil stays in the ball");
            if interior[mj] {
                let v = uidx[mj];
                ar.push((v, -w));
                if v == u {
                    diag[u] += -w;
                }
            } else {
                rhs[u] += w * values[mj];
            }
        }
        a_rows.push(ar);
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        for (u, r) in a_rows.iter().enumerate() {
            out[u] = r.iter().map(|&(v, w)| w * x[v]).sum();
        }
    };
    let residual_max = |x: &[f64]| -> f64 {
        let mut out = vec![0.0; n];
        apply(x, &mut out);
        (0..n)
            .map(|u| ((rhs[u] - out[u]) / vol[unknowns[u]]).abs())
            .fold(0.0, f64::max)
    };
    let mut x: Vec<f64> = unknowns.iter().map(|&k| values[k]).collect();
    if n == 0 {
        return Ok((0.0, 0));
    }
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = (0..n).map(|u| rhs[u] - ax[u]).collect();
    let mut z: Vec<f64> = (0..n).map(|u| r[u] / diag[u]).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut res = residual_max(&x);
    while res > opts.tolerance {
        if iterations >= opts.max_iter {
            return Err(Error::SolverDiverged { history: history.split_off(history.len().saturating_sub(10)) });
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::SolverDiverged { history });
        }
        let alpha = rz / pap;
        for u in 0..n {
            x[u] += alpha * p[u];
            r[u] -= alpha * ap[u];
        }
        iterations += 1;
        // the recurrence residual drifts; check the true one periodically
        let approx = (0..n).map(|u| (r[u] / vol[unknowns[u]]).abs()).fold(0.0, f64::max);
        if approx <= opts.tolerance || iterations % 50 == 0 {
            res = residual_max(&x);
            history.push(res);
            if approx <= opts.tolerance && res > opts.tolerance {
                // restart from the true residual
                apply(&x, &mut ax);
                for u in 0..n {
                    r[u] = rhs[u] - ax[u];
                }
                for u in 0..n {
                    z[u] = r[u] / diag[u];
                }
                p.copy_from_slice(&z);
                rz = r.iter().zip(&z).map(|(a, b)| a * b).sum();
                continue;
            }
        }
        for u in 0..n {
            z[u] = r[u] / diag[u];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for u in 0..n {
            p[u] = z[u] + beta * p[u];
        }
    }
    for (u, &k) in unknowns.iter().enumerate() {
        values[k] = x[u];
    }
    Ok((res, iterations))
}

fn sqrt_spd(g: &DMatrix<f64>) -> DMatrix<f64> {
    let e = nalgebra::SymmetricEigen::new(g.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

fn interpolate_at(bounds: &CoordinateBox, pos: &[Option<usize>], values: &[f64], x: &[f64]) -> f64 {
    let m = bounds.dim();
    let mut base = Vec::with_capacity(m);
    let mut frac = Vec::with_capacity(m);
    for k in 0..m {
        let t = (x[k] - bounds.lower[k]) / bounds.step(k);
        let i = (t.floor().max(0.0) as usize).min(bounds.resolution[k] - 2);
        base.push(i);
        frac.push((t - i as f64).clamp(0.0, 1.0));
    }
    let mut acc = 0.0;
    let mut wsum = 0.0;
    for corner in 0..(1usize << m) {
        let mut w = 1.0;
        let mut mi = base.clone();
        for k in 0..m {
            if (corner >> k) & 1 == 1 {
                mi[k] += 1;
                w *= frac[k];
            } else {
                w *= 1.0 - frac[k];
            }
        }
        if w == 0.0 {
            continue;
        }
        if let Some(p) = pos[bounds.flat_index(&mi)] {
            acc += w * values[p];
            wsum += w;
        }
    }
    if wsum > 0.0 {
        acc / wsum
    } else {
        values[pos[bounds.nearest(x)].unwrap_or(0)]
    }
}

impl HarmonicChartCandidate {
    /// Jacobians, pushed metric and determinant range from member values.
    fn finish(
        chart: &MetricChart,
        ball: MetricBall,
        mut phi: Vec<Vec<f64>>,
        laplace_residual: f64,
        solver_iterations: usize,
        opts: &HarmonicOptions,
    ) -> Result<Self, Error> {
        let b = &chart.bounds;
        let m = b.dim();
        let pos = member_index(b, &ball.members);
        let interior = interior_flags(b, &ball.members, &pos);
        // centre: φ(x) = 0
        for c in 0..m {
            let vals: Vec<f64> = phi.iter().map(|p| p[c]).collect();
            let shift = interpolate_at(b, &pos, &vals, &ball.center);
            for p in phi.iter_mut() {
                p[c] -= shift;
            }
        }
        let mut jacobian = Vec::with_capacity(ball.members.len());
        let mut pushed = Vec::with_capacity(ball.members.len());
        let (mut jmin, mut jmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for &node in &ball.members {
            let mut d = DMatrix::zeros(m, m);
            let mut ok = true;
            'outer: for a in 0..m {
                for k in 0..m {
                    match ball_derivative(b, &pos, node, k, &|p| Some(phi[p][a])) {
                        Some(v) => d[(a, k)] = v,
                        None => {
                            ok = false;
                            break 'outer;
                        }
                    }
                }
            }
            if !ok {
                jacobian.push(None);
                pushed.push(None);
                continue;
            }
            let x = b.point(node);
            let s = chart.metric_at(&x)?;
            let jac = d.determinant() / s.vol_density;
            if !(jac >= opts.min_jacobian) {
                return Err(Error::NotDiffeomorphic { point: x, jacobian: jac });
            }
            jmin = jmin.min(jac);
            jmax = jmax.max(jac);
            pushed.push(Some(&d * &s.ginv * d.transpose()));
            jacobian.push(Some(d));
        }
        Ok(HarmonicChartCandidate {
            center: ball.center,
            radius: ball.radius,
            bounds: b.clone(),
            members: ball.members,
            interior,
            phi,
            jacobian,
            pushed_metric: pushed,
            laplace_residual,
            solver_iterations,
            jacobian_range: (jmin, jmax),
            truncated: ball.truncated,
        })
    }

    /// A candidate from explicitly given coordinate functions (not solved);
    /// the Laplace residual is still measured.
    pub fn from_coordinates(chart: &MetricChart, x: &[f64], r: f64, coords: &[Field], opts: &HarmonicOptions) -> Result<Self, Error> {
        let ball = geodesic::metric_ball(chart, x, r)?;
        let b = &chart.bounds;
        let pos = member_index(b, &ball.members);
        let interior = interior_flags(b, &ball.members, &pos);
        let phi: Vec<Vec<f64>> = ball
            .members
            .iter()
            .map(|&i| {
                let p = b.point(i);
                coords.iter().map(|c| c.value(&p)).collect()
            })
            .collect();
        let rows = assemble(chart, &ball.members, &interior)?;
        let mut res = 0.0f64;
        for (k, row) in rows.iter().enumerate() {
            if !interior[k] {
                continue;
            }
            let vol = chart.metric_at(&b.point(ball.members[k]))?.vol_density;
            for c in 0..coords.len() {
                let s: f64 = row.iter().map(|&(j, w)| w * phi[pos[j].unwrap()][c]).sum();
                res = res.max((s / vol).abs());
            }
        }
        Self::finish(chart, ball, phi, res, 0, opts)
    }

    /// Largest `max_{ab} |g^{ab}_φ − δ^{ab}|` over members.
    pub fn pushed_metric_defect(&self) -> f64 {
        self.pushed_metric
            .iter()
            .flatten()
            .map(|g| (g - DMatrix::identity(g.nrows(), g.ncols())).abs().max())
            .fold(0.0, f64::max)
    }
}

/// Solves for harmonic coordinates on `B_r(x)` with geodesic normal
/// coordinate boundary data.
pub fn solve_harmonic_chart(chart: &MetricChart, x: &[f64], r: f64, opts: &HarmonicOptions) -> Result<HarmonicChartCandidate, Error> {
    let ball = geodesic::metric_ball(chart, x, r)?;
    let b = &chart.bounds;
    let m = b.dim();
    let pos = member_index(b, &ball.members);
    let interior = interior_flags(b, &ball.members, &pos);
    if !interior.iter().any(|&i| i) {
        return Err(Error::PreconditionFailed(format!(
            "ball of radius {r} at {x:?} has no interior grid nodes"
        )));
    }
    let g0 = chart.metric_at(x)?.g;
    let root = sqrt_spd(&g0);
    // boundary data: normal coordinates z = G(x)^{1/2} log_x(p); interior
    // initial guess: its linearization G(x)^{1/2}(p − x)
    let mut phi: Vec<Vec<f64>> = Vec::with_capacity(ball.members.len());
    for (k, &i) in ball.members.iter().enumerate() {
        let p = b.point(i);
        let lin: Vec<f64> = p.iter().zip(x).map(|(a, c)| a - c).collect();
        let v = if interior[k] || chart.is_constant() || p.as_slice() == x {
            lin
        } else {
            geodesic::shoot(chart, x, &p, Some(&lin))
                .map(|s| s.velocity)
                .ok_or_else(|| Error::SolverDiverged { history: vec![] })?
        };
        let z = &root * nalgebra::DVector::from_vec(v);
        phi.push(z.iter().copied().collect());
    }
    let rows = assemble(chart, &ball.members, &interior)?;
    let vol: Vec<f64> = ball
        .members
        .iter()
        .map(|&i| chart.metric_at(&b.point(i)).map(|s| s.vol_density))
        .collect::<Result<_, _>>()?;
    let mut worst_res = 0.0f64;
    let mut iters = 0;
    for c in 0..m {
        let mut vals: Vec<f64> = phi.iter().map(|p| p[c]).collect();
        let (res, it) = solve_dirichlet(&rows, &ball.members, &interior, &pos, &vol, &mut vals, opts)?;
        worst_res = worst_res.max(res);
        iters = iters.max(it);
        for (p, v) in phi.iter_mut().zip(vals) {
            p[c] = v;
        }
    }
    HarmonicChartCandidate::finish(chart, ball, phi, worst_res, iters, opts)
}

/// Multi-index derivative fields of one pushed-metric component.
struct DerivLevel {
    /// Sorted coordinate indices of the multi-index.
    beta: Vec<usize>,
    values: Vec<Option<f64>>,
}

/// Evaluates the ellipticity sandwich and the weighted derivative/Hölder
/// bound for a candidate.
pub fn check_hr_conditions(cand: &HarmonicChartCandidate, k: usize, alpha: f64, seed: u64) -> RadiusCertificate {
    let b = &cand.bounds;
    let m = b.dim();
    let r = cand.radius;
    let pos = member_index(b, &cand.members);
    let inner_r = INNER_FRACTION * r;
    let deep: Vec<bool> = cand.phi.iter().map(|z| z.iter().map(|v| v * v).sum::<f64>().sqrt() <= inner_r).collect();
    let mut margin = f64::INFINITY;
    for g in cand.pushed_metric.iter().flatten() {
        let e = nalgebra::SymmetricEigen::new(g.clone()).eigenvalues;
        let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        margin = margin.min((2.0 - hi).min(lo - 0.5));
    }
    // ∂_φ = (Dφ)^{-T} ∇_x
    let inv: Vec<Option<DMatrix<f64>>> = cand
        .jacobian
        .iter()
        .map(|j| j.as_ref().and_then(|d| d.clone().try_inverse()))
        .collect();
    let phi_derivs = |values: &[Option<f64>]| -> Vec<Vec<Option<f64>>> {
        let mut out = vec![vec![None; cand.members.len()]; m];
        for (p, &node) in cand.members.iter().enumerate() {
            let Some(jinv) = &inv[p] else { continue };
            let mut grad = vec![0.0; m];
            let mut ok = values[p].is_some();
            for kx in 0..m {
                match ball_derivative(b, &pos, node, kx, &|q| values[q]) {
                    Some(v) => grad[kx] = v,
                    None => ok = false,
                }
            }
            if !ok {
                continue;
            }
            for c in 0..m {
                out[c][p] = Some((0..m).map(|kx| jinv[(kx, c)] * grad[kx]).sum());
            }
        }
        out
    };
    let mut hr2 = 0.0f64;
    for a in 0..m {
        for bb in a..m {
            let base: Vec<Option<f64>> = cand.pushed_metric.iter().map(|g| g.as_ref().map(|g| g[(a, bb)])).collect();
            let mut level = vec![DerivLevel { beta: vec![], values: base }];
            let mut total = 0.0;
            for order in 1..=k {
                let mut next = Vec::new();
                for f in &level {
                    let d = phi_derivs(&f.values);
                    let start = f.beta.last().copied().unwrap_or(0);
                    for (c, vals) in d.into_iter().enumerate().skip(start) {
                        let mut beta = f.beta.clone();
                        beta.push(c);
                        next.push(DerivLevel { beta, values: vals });
                    }
                }
                for f in &next {
                    let sup = f
                        .values
                        .iter()
                        .zip(&deep)
                        .filter_map(|(v, &d)| v.filter(|_| d))
                        .fold(0.0f64, |s, v| s.max(v.abs()));
                    total += r.powi(order as i32) * sup;
                }
                level = next;
            }
            for f in &level {
                let (pts, vals): (Vec<Vec<f64>>, Vec<f64>) = f
                    .values
                    .iter()
                    .enumerate()
                    .filter(|&(p, _)| deep[p])
                    .filter_map(|(p, v)| v.map(|v| (cand.phi[p].clone(), v)))
                    .unzip();
                total += r.powf(k as f64 + alpha) * holder_of_samples(&pts, &vals, alpha, seed);
            }
            hr2 = hr2.max(total);
        }
    }
    let verdict = if cand.truncated {
        Verdict::ExceedsGrid
    } else if margin >= 0.0 && hr2 <= 1.0 {
        Verdict::Holds
    } else {
        Verdict::Fails
    };
    RadiusCertificate {
        r,
        k,
        alpha,
        hr1_margin: margin,
        hr2_value: hr2,
        laplace_residual: cand.laplace_residual,
        verdict,
    }
}

/// Certificate for radius `r`, with grid overflow reported as a verdict.
pub fn certify(chart: &MetricChart, x: &[f64], r: f64, k: usize, alpha: f64, opts: &HarmonicOptions) -> Result<RadiusCertificate, Error> {
    let ball = geodesic::metric_ball(chart, x, r).map_err(|e| e.at_radius(r))?;
    if ball.truncated {
        return Ok(RadiusCertificate {
            r,
            k,
            alpha,
            hr1_margin: f64::NAN,
            hr2_value: f64::NAN,
            laplace_residual: f64::NAN,
            verdict: Verdict::ExceedsGrid,
        });
    }
    let cand = solve_harmonic_chart(chart, x, r, opts).map_err(|e| e.at_radius(r))?;
    Ok(check_hr_conditions(&cand, k, alpha, opts.seed))
}

#[derive(Clone, Debug, Serialize)]
pub struct RadiusEstimate {
    /// Largest verified radius; `Infinite` stands for the "≥ r_max" sentinel.
    pub value: Extended,
    pub r_max: f64,
    /// True when the condition already failed at the smallest tested radius,
    /// so `value` is that radius without a certificate.
    pub unresolved: bool,
    /// Every tested radius holding implies all smaller tested radii hold.
    pub monotone: bool,
    pub certificates: Vec<RadiusCertificate>,
}

impl RadiusEstimate {
    /// The radius as a number, with the sentinel read as `r_max`.
    pub fn conservative(&self) -> f64 {
        match self.value {
            Extended::Finite(r) => r,
            Extended::Infinite => self.r_max,
        }
    }
}

/// Bisection for the harmonic radius at `x` over `(0, r_max]`.
pub fn estimate_harmonic_radius(
    chart: &MetricChart,
    x: &[f64],
    k: usize,
    alpha: f64,
    r_max: f64,
    opts: &HarmonicOptions,
) -> Result<RadiusEstimate, Error> {
    let h = chart.bounds.max_step();
    let mut certs = Vec::new();
    let top = certify(chart, x, r_max, k, alpha, opts)?;
    let holds = top.verdict == Verdict::Holds;
    certs.push(top);
    if holds {
        return Ok(RadiusEstimate { value: Extended::Infinite, r_max, unresolved: false, monotone: true, certificates: certs });
    }
    let r_min = (4.0 * h).min(r_max / 2.0);
    let low = certify(chart, x, r_min, k, alpha, opts)?;
    let low_holds = low.verdict == Verdict::Holds;
    certs.push(low);
    if !low_holds {
        return Ok(RadiusEstimate {
            value: Extended::Finite(r_min),
            r_max,
            unresolved: true,
            monotone: true,
            certificates: certs,
        });
    }
    let (mut lo, mut hi) = (r_min, r_max);
    for _ in 0..12 {
        if hi - lo < h {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let c = certify(chart, x, mid, k, alpha, opts)?;
        if c.verdict == Verdict::Holds {
            lo = mid;
        } else {
            hi = mid;
        }
        certs.push(c);
    }
    let mut sorted: Vec<&RadiusCertificate> = certs.iter().collect();
    sorted.sort_by(|a, b| a.r.total_cmp(&b.r));
    let mut seen_fail = false;
    let mut monotone = true;
    for c in sorted {
        if c.verdict == Verdict::Holds && seen_fail {
            monotone = false;
        }
        if c.verdict != Verdict::Holds {
            seen_fail = true;
        }
    }
    Ok(RadiusEstimate { value: Extended::Finite(lo), r_max, unresolved: false, monotone, certificates: certs })
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub r: f64,
    /// `max_{ab} sup |∂_φ g^{ab}_φ|` over the inner half ball.
    pub sup_derivative: f64,
    /// `r · sup_derivative`.
    pub product: f64,
    pub verdict: Verdict,
}

/// For each radius, the largest first derivative of the pushed metric over
/// `B_{r/2}(x)` in harmonic coordinates, scaled by `r`.
pub fn derivative_decay_experiment(chart: &MetricChart, x: &[f64], radii: &[f64], opts: &HarmonicOptions) -> Result<Vec<DecayRow>, Error> {
    let mut rows = Vec::new();
    for &r in radii {
        let cand = solve_harmonic_chart(chart, x, r, opts).map_err(|e| e.at_radius(r))?;
        let cert = check_hr_conditions(&cand, 1, 0.5, opts.seed);
        let inner = geodesic::metric_ball(chart, x, 0.5 * r)?;
        let inner_mask = inner.mask(chart.bounds.len());
        let b = &cand.bounds;
        let m = b.dim();
        let pos = member_index(b, &cand.members);
        let mut sup = 0.0f64;
        for (p, &node) in cand.members.iter().enumerate() {
            if !inner_mask[node] {
                continue;
            }
            let Some(jinv) = cand.jacobian[p].as_ref().and_then(|d| d.clone().try_inverse()) else { continue };
            for a in 0..m {
                for bb in a..m {
                    let val = |q: usize| cand.pushed_metric[q].as_ref().map(|g| g[(a, bb)]);
                    let mut grad = vec![0.0; m];
                    let mut ok = true;
                    for kx in 0..m {
                        match ball_derivative(b, &pos, node, kx, &val) {
                            Some(v) => grad[kx] = v,
                            None => ok = false,
                        }
                    }
                    if !ok {
                        continue;
                    }
                    for c in 0..m {
                        let d: f64 = (0..m).map(|kx| jinv[(kx, c)] * grad[kx]).sum();
                        sup = sup.max(d.abs());
                    }
                }
            }
        }
        rows.push(DecayRow { r, sup_derivative: sup, product: r * sup, verdict: cert.verdict });
    }
    Ok(rows)
}

/// Harmonic radius of a manifold model: the declared value if any, infinity
/// for constant-metric charts, otherwise the minimum over base points of the
/// estimate (sentinels read as `r_max`).
pub fn manifold_radius(
    charts: &[Arc<MetricChart>],
    declared: Option<Extended>,
    base_points: &[Vec<f64>],
    r_max: f64,
    opts: &HarmonicOptions,
) -> Result<(Extended, Vec<RadiusEstimate>), Error> {
    if let Some(d) = declared {
        return Ok((d, vec![]));
    }
    if charts.iter().all(|c| c.is_constant()) {
        return Ok((Extended::Infinite, vec![]));
    }
    let points: Vec<(usize, Vec<f64>)> = if base_points.is_empty() {
        charts
            .iter()
            .enumerate()
            .map(|(k, c)| (k, c.bounds.lower.iter().zip(&c.bounds.upper).map(|(l, u)| 0.5 * (l + u)).collect()))
            .collect()
    } else {
        base_points
            .iter()
            .map(|p| {
                charts
                    .iter()
                    .position(|c| c.bounds.contains(p))
                    .map(|k| (k, p.clone()))
                    .ok_or_else(|| Error::OutsideChart { chart: "atlas".into(), point: p.clone() })
            })
            .collect::<Result<_, _>>()?
    };
    let mut best = f64::INFINITY;
    let mut all = Vec::new();
    for (k, p) in &points {
        let est = estimate_harmonic_radius(&charts[*k], p, 1, 0.5, r_max, opts)?;
        best = best.min(est.conservative());
        all.push(est);
    }
    Ok((Extended::Finite(best), all))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field;
    use crate::fixtures;
    use crate::metric::DerivativeMode;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn flat_charts_are_affine() {
        let c = fixtures::flat_chart(2, -1.0, 1.0, 41);
        let cand = solve_harmonic_chart(&c, &[0.1, -0.05], 0.5, &HarmonicOptions::default()).unwrap();
        assert!(cand.laplace_residual < 1e-12);
        assert!(cand.pushed_metric_defect() < 1e-8);
        for (p, &node) in cand.phi.iter().zip(&cand.members) {
            let x = c.bounds.point(node);
            assert!((p[0] - (x[0] - 0.1)).abs() < 1e-12 && (p[1] - (x[1] + 0.05)).abs() < 1e-12);
        }
        let cert = check_hr_conditions(&cand, 1, 0.5, 0);
        assert!((cert.hr1_margin - 0.5).abs() < 1e-8);
        assert!(cert.hr2_value < 1e-6);
        assert_eq!(cert.verdict, Verdict::Holds);
    }

    #[test]
    fn constant_metrics_are_rescaled() {
        let c = fixtures::conformal_chart(2, 3.0, -1.0, 1.0, 41);
        let cand = solve_harmonic_chart(&c, &[0.0, 0.0], 0.8, &HarmonicOptions::default()).unwrap();
        assert!(cand.pushed_metric_defect() < 1e-8);
        let est = estimate_harmonic_radius(&c, &[0.0, 0.0], 1, 0.5, 0.8, &HarmonicOptions::default()).unwrap();
        assert_eq!(est.value, Extended::Infinite);
    }

    #[test]
    fn identity_chart_fails_the_sandwich() {
        // g = δ/3, so g^{ij} = 3δ in the identity chart
        let c = fixtures::conformal_chart(2, 1.0 / 3.0, -1.0, 1.0, 21);
        let coords = vec![field::expr("x", &["x", "y"]).unwrap(), field::expr("y", &["x", "y"]).unwrap()];
        let cand = HarmonicChartCandidate::from_coordinates(&c, &[0.0, 0.0], 0.3, &coords, &HarmonicOptions::default()).unwrap();
        let cert = check_hr_conditions(&cand, 1, 0.5, 0);
        assert!((cert.hr1_margin + 1.0).abs() < 1e-12);
        assert_eq!(cert.verdict, Verdict::Fails);
    }

    #[test]
    fn sphere_chart_small_ball() {
        let c = fixtures::sphere_chart(1.0, [FRAC_PI_2 - 0.6, FRAC_PI_2 + 0.6], [-0.6, 0.6], 49, DerivativeMode::fd());
        let cand = solve_harmonic_chart(&c, &[FRAC_PI_2, 0.0], 0.3, &HarmonicOptions::default()).unwrap();
        assert!(cand.laplace_residual <= 1e-6);
        let (lo, hi) = cand.jacobian_range;
        assert!(lo >= 0.9 && hi <= 1.1, "{lo} {hi}");
        let cert = check_hr_conditions(&cand, 1, 0.5, 0);
        assert_eq!(cert.verdict, Verdict::Holds);
        assert!(cert.hr2_value > 0.0);
    }

    #[test]
    fn truncated_balls_exceed_the_grid() {
        let c = fixtures::flat_chart(2, -1.0, 1.0, 21);
        let cert = certify(&c, &[0.8, 0.0], 0.5, 1, 0.5, &HarmonicOptions::default()).unwrap();
        assert_eq!(cert.verdict, Verdict::ExceedsGrid);
    }
}
