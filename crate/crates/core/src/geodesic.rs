//! Geodesic distance and metric balls on a chart.
//!
//! Point-to-point distances come from Newton shooting on the geodesic
//! equation, with a Dijkstra pass on the 3^m-neighbourhood grid graph as
//! initial estimate and fallback. Ball membership uses the length of the
//! straight coordinate segment (an upper bound on the distance) and shoots
//! only for nodes whose segment length falls in a thin band above the radius.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::metric::MetricChart;
use crate::Error;

const SHOOT_TOL: f64 = 1e-11;
const SHOOT_MAX_ITER: usize = 50;
/// Nodes whose segment length is within `(r, (1 + BAND) r]` are resolved by
/// shooting; beyond the band they are taken to be outside.
const BAND: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    /// Closed form for constant metrics.
    Exact,
    Shooting,
    Grid,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Distance {
    pub value: f64,
    pub method: DistanceMethod,
}

fn integration_steps(chart: &MetricChart, x: &[f64], y: &[f64]) -> usize {
    let d = x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ((2.0 * d / chart.bounds.min_step()).ceil() as usize).clamp(8, 64)
}

/// Geodesic acceleration `-Γ^l_ij v^i v^j`.
fn accel(chart: &MetricChart, x: &[f64], v: &[f64]) -> Result<Vec<f64>, Error> {
    let m = x.len();
    let gamma = chart.christoffel_at(x)?;
    let mut a = vec![0.0; m];
    for (l, al) in a.iter_mut().enumerate() {
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += gamma[(l * m + i) * m + j] * v[i] * v[j];
            }
        }
        *al = -s;
    }
    Ok(a)
}

/// Integrates the geodesic equation from `x` with initial velocity `v` over
/// unit time with `steps` RK4 steps; returns the end point.
pub fn exp_map(chart: &MetricChart, x: &[f64], v: &[f64], steps: usize) -> Result<Vec<f64>, Error> {
    let m = x.len();
    let h = 1.0 / steps as f64;
    let mut p = x.to_vec();
    let mut q = v.to_vec();
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(u, w)| u + s * w).collect() };
    for _ in 0..steps {
        let k1x = q.clone();
        let k1v = accel(chart, &p, &q)?;
        let p2 = add(&p, &k1x, 0.5 * h);
        let k2x = add(&q, &k1v, 0.5 * h);
        let k2v = accel(chart, &p2, &k2x)?;
        let p3 = add(&p, &k2x, 0.5 * h);
        let k3x = add(&q, &k2v, 0.5 * h);
        let k3v = accel(chart, &p3, &k3x)?;
        let p4 = add(&p, &k3x, h);
        let k4x = add(&q, &k3v, h);
        let k4v = accel(chart, &p4, &k4x)?;
        for i in 0..m {
            p[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            q[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
    }
    Ok(p)
}

/// Result of solving the boundary value problem `exp_x(v) = y`.
#[derive(Clone, Debug)]
pub struct Shot {
    pub velocity: Vec<f64>,
    pub length: f64,
    pub iterations: usize,
}

fn residual(chart: &MetricChart, x: &[f64], y: &[f64], v: &[f64], steps: usize) -> Option<Vec<f64>> {
    let e = exp_map(chart, x, v, steps).ok()?;
    Some(e.iter().zip(y).map(|(a, b)| a - b).collect())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Newton shooting for the initial velocity of the geodesic from `x` to `y`.
/// Returns `None` when the iteration does not converge.
pub fn shoot(chart: &MetricChart, x: &[f64], y: &[f64], guess: Option<&[f64]>) -> Option<Shot> {
    let m = x.len();
    let steps = integration_steps(chart, x, y);
    let mut v: Vec<f64> = match guess {
        Some(g) => g.to_vec(),
        None => y.iter().zip(x).map(|(a, b)| a - b).collect(),
    };
    let scale = 1.0 + max_abs(y);
    let mut f = residual(chart, x, y, &v, steps)?;
    for it in 0..=SHOOT_MAX_ITER {
        let err = max_abs(&f);
        if err <= SHOOT_TOL * scale {
            let length = chart.norm(x, &v);
            return Some(Shot { velocity: v, length, iterations: it });
        }
        if it == SHOOT_MAX_ITER {
            break;
        }
        let delta = 1e-7 * (1.0 + max_abs(&v));
        let mut jac = nalgebra::DMatrix::zeros(m, m);
        for k in 0..m {
            let mut w = v.clone();
            w[k] += delta;
            let fk = residual(chart, x, y, &w, steps)?;
            for i in 0..m {
                jac[(i, k)] = (fk[i] - f[i]) / delta;
            }
        }
        let rhs = nalgebra::DVector::from_iterator(m, f.iter().map(|a| -a));
        let step = jac.lu().solve(&rhs)?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = v.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            if let Some(ft) = residual(chart, x, y, &trial, steps) {
                if max_abs(&ft) < err || t < 1e-3 {
                    v = trial;
                    f = ft;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-3 {
                return None;
            }
        }
    }
    None
}

/// Length of the straight coordinate segment from `x` to `y` (Simpson rule);
/// an upper bound on the geodesic distance when the segment stays in the chart.
pub fn segment_length(chart: &MetricChart, x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    if let Some(g) = chart.constant_matrix() {
        return quad_form(g, &d).sqrt();
    }
    const N: usize = 8;
    let mut s = 0.0;
    let mut p = vec![0.0; x.len()];
    for k in 0..=N {
        let t = k as f64 / N as f64;
        for i in 0..x.len() {
            p[i] = x[i] + t * d[i];
        }
        let w = if k == 0 || k == N {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * chart.norm(&p, &d);
    }
    s / (3.0 * N as f64)
}

fn quad_form(g: &nalgebra::DMatrix<f64>, d: &[f64]) -> f64 {
    let m = d.len();
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            s += g[(i, j)] * d[i] * d[j];
        }
    }
    s.max(0.0)
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Grid shortest-path distances from `source` to every node; edges join
/// 3^m-neighbours and weigh `|Δ|_{g(midpoint)}`. Nodes outside `mask` are
/// not traversed; unreachable nodes get `inf`.
pub fn dijkstra(chart: &MetricChart, source: usize, mask: Option<&[bool]>) -> Vec<f64> {
    let b = &chart.bounds;
    let offsets = b.neighbor_offsets();
    let steps = b.steps();
    let mut dist = vec![f64::INFINITY; b.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem(0.0, source));
    let allowed = |i: usize| mask.map_or(true, |m| m[i]);
    while let Some(HeapItem(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        let pu = b.point(u);
        for off in &offsets {
            let Some(v) = b.offset(u, off) else { continue };
            if !allowed(v) {
                continue;
            }
            let delta: Vec<f64> = off.iter().zip(&steps).map(|(o, h)| *o as f64 * h).collect();
            let mid: Vec<f64> = pu.iter().zip(&delta).map(|(p, d)| p + 0.5 * d).collect();
            let w = chart.norm(&mid, &delta);
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapItem(nd, v));
            }
        }
    }
    dist
}

/// Geodesic distance between two chart points.
pub fn geodesic_distance(chart: &MetricChart, x: &[f64], y: &[f64]) -> Result<Distance, Error> {
    chart.metric_at(x)?;
    chart.metric_at(y)?;
    if x == y {
        return Ok(Distance { value: 0.0, method: DistanceMethod::Exact });
    }
    if let Some(g) = chart.constant_matrix() {
        let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        return Ok(Distance { value: quad_form(g, &d).sqrt(), method: DistanceMethod::Exact });
    }
    let b = &chart.bounds;
    let (ix, iy) = (b.nearest(x), b.nearest(y));
    let grid = dijkstra(chart, ix, None)[iy];
    if !grid.is_finite() {
        return Err(Error::Unreachable { from: x.to_vec(), to: y.to_vec() });
    }
    let grid = grid + segment_length(chart, x, &b.point(ix)) + segment_length(chart, &b.point(iy), y);
    match shoot(chart, x, y, None) {
        Some(s) if s.length <= grid * (1.0 + 1e-6) => Ok(Distance { value: s.length, method: DistanceMethod::Shooting }),
        _ => Ok(Distance { value: grid, method: DistanceMethod::Grid }),
    }
}

/// Distances from `o` to each of `points`, sharing one Dijkstra pass.
pub fn distances_from(chart: &MetricChart, o: &[f64], points: &[Vec<f64>]) -> Result<Vec<f64>, Error> {
    chart.metric_at(o)?;
    if let Some(g) = chart.constant_matrix() {
        return Ok(points
            .iter()
            .map(|p| {
                let d: Vec<f64> = p.iter().zip(o).map(|(a, b)| a - b).collect();
                quad_form(g, &d).sqrt()
            })
            .collect());
    }
    let b = &chart.bounds;
    let io = b.nearest(o);
    let grid = dijkstra(chart, io, None);
    let po = b.point(io);
    let base = segment_length(chart, o, &po);
    points
        .iter()
        .map(|p| {
            chart.metric_at(p)?;
            if p.as_slice() == o {
                return Ok(0.0);
            }
            let ip = b.nearest(p);
            if !grid[ip].is_finite() {
                return Err(Error::Unreachable { from: o.to_vec(), to: p.clone() });
            }
            let est = base + grid[ip] + segment_length(chart, &b.point(ip), p);
            Ok(match shoot(chart, o, p, None) {
                Some(s) if s.length <= est * (1.0 + 1e-6) => s.length,
                _ => est,
            })
        })
        .collect()
}

/// Distance used for ball membership: exact for constant metrics, otherwise
/// the segment length, refined by shooting in the band just above `r`.
/// Returns `None` when the node is clearly outside.
fn banded_distance(chart: &MetricChart, x: &[f64], y: &[f64], r: f64) -> Option<f64> {
    let seg = segment_length(chart, x, y);
    if chart.is_constant() || seg <= r {
        return Some(seg);
    }
    if seg > (1.0 + BAND) * r {
        return None;
    }
    match shoot(chart, x, y, None) {
        Some(s) => Some(s.length.min(seg)),
        None => Some(seg),
    }
}

/// Grid realization of the closed ball `{d(center, ·) ≤ r}`.
#[derive(Clone, Debug, Serialize)]
pub struct MetricBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub members: Vec<usize>,
    /// Some member lies on the chart boundary, so the true ball may extend
    /// beyond the box.
    pub truncated: bool,
}

impl MetricBall {
    pub fn mask(&self, len: usize) -> Vec<bool> {
        let mut m = vec![false; len];
        for &i in &self.members {
            m[i] = true;
        }
        m
    }
}

/// Largest metric length `sqrt(g_kk) h_k` of a grid step over the chart.
pub fn metric_step(chart: &MetricChart) -> Result<f64, Error> {
    let b = &chart.bounds;
    let steps = b.steps();
    let longest = |g: &nalgebra::DMatrix<f64>| (0..b.dim()).map(|k| g[(k, k)].sqrt() * steps[k]).fold(0.0, f64::max);
    if let Some(g) = chart.constant_matrix() {
        return Ok(longest(g));
    }
    let mut best = 0.0f64;
    for x in b.points() {
        best = best.max(longest(&chart.metric_at(&x)?.g));
    }
    Ok(best)
}

/// Per-axis half-widths of a coordinate box guaranteed to contain the ball:
/// `|Δx^k| ≤ r · sqrt(sup g^{kk})`.
pub fn ball_extent(chart: &MetricChart, r: f64) -> Result<Vec<f64>, Error> {
    let m = chart.dim();
    let mut sup = vec![0.0f64; m];
    if let Some(g) = chart.constant_matrix() {
        let s = crate::metric::sample_from_matrix(g.clone(), &chart.bounds.lower)?;
        for k in 0..m {
            sup[k] = s.ginv[(k, k)];
        }
    } else {
        for x in chart.bounds.points() {
            let s = chart.metric_at(&x)?;
            for k in 0..m {
                sup[k] = sup[k].max(s.ginv[(k, k)]);
            }
        }
    }
    Ok(sup.iter().map(|s| r * s.sqrt()).collect())
}

pub fn metric_ball(chart: &MetricChart, center: &[f64], r: f64) -> Result<MetricBall, Error> {
    let extent = ball_extent(chart, r)?;
    metric_ball_with_extent(chart, center, r, &extent)
}

/// As [`metric_ball`], with a precomputed [`ball_extent`] for radius `r`.
pub fn metric_ball_with_extent(chart: &MetricChart, center: &[f64], r: f64, extent: &[f64]) -> Result<MetricBall, Error> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {r}")));
    }
    chart.metric_at(center)?;
    let b = &chart.bounds;
    let m = b.dim();
    let mut lo = vec![0usize; m];
    let mut hi = vec![0usize; m];
    for k in 0..m {
        let h = b.step(k);
        let a = ((center[k] - extent[k] - b.lower[k]) / h).floor().max(0.0) as usize;
        let z = ((center[k] + extent[k] - b.lower[k]) / h).ceil().max(0.0) as usize;
        lo[k] = a.min(b.resolution[k] - 1);
        hi[k] = z.min(b.resolution[k] - 1);
    }
    let nearest = b.nearest(center);
    let mut members = Vec::new();
    let mut mi = lo.clone();
    loop {
        let idx = b.flat_index(&mi);
        let p = b.point(idx);
        let inside = idx == nearest || banded_distance(chart, center, &p, r).is_some_and(|d| d <= r);
        if inside {
            members.push(idx);
        }
        let mut k = m;
        loop {
            if k == 0 {
                let truncated = members.iter().any(|&i| b.is_boundary(i))
                    && (0..m).any(|k| center[k] - extent[k] < b.lower[k] || center[k] + extent[k] > b.upper[k]);
                return Ok(MetricBall { center: center.to_vec(), radius: r, members, truncated });
            }
            k -= 1;
            if mi[k] < hi[k] {
                mi[k] += 1;
                break;
            }
            mi[k] = lo[k];
        }
    }
}

/// Segment-length distances from `center` to the grid nodes within `r`
/// (coordinate box of half-widths `extent`). For constant metrics these are
/// exact; otherwise they are upper bounds, so the node set is an inner
/// approximation of the ball. Suited to many small balls sharing one grid.
pub fn segment_ball(chart: &MetricChart, center: &[f64], r: f64, extent: &[f64]) -> Vec<(usize, f64)> {
    let b = &chart.bounds;
    let m = b.dim();
    let mut lo = vec![0usize; m];
    let mut hi = vec![0usize; m];
    for k in 0..m {
        let h = b.step(k);
        lo[k] = (((center[k] - extent[k] - b.lower[k]) / h).floor().max(0.0) as usize).min(b.resolution[k] - 1);
        hi[k] = (((center[k] + extent[k] - b.lower[k]) / h).ceil().max(0.0) as usize).min(b.resolution[k] - 1);
    }
    let mut out = Vec::new();
    let mut mi = lo.clone();
    loop {
        let idx = b.flat_index(&mi);
        let d = segment_length(chart, center, &b.point(idx));
        if d <= r {
            out.push((idx, d));
        }
        let mut k = m;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if mi[k] < hi[k] {
                mi[k] += 1;
                break;
            }
            mi[k] = lo[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::metric::DerivativeMode;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn euclidean_distances() {
        let c = fixtures::flat_chart(2, -5.0, 5.0, 11);
        let d = geodesic_distance(&c, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_eq!(d.value, 5.0);
        let c4 = fixtures::conformal_chart(2, 4.0, -2.0, 2.0, 9);
        assert_eq!(geodesic_distance(&c4, &[0.0, 0.0], &[1.0, 0.0]).unwrap().value, 2.0);
    }

    #[test]
    fn great_circle_on_the_equator() {
        let c = fixtures::sphere_chart(1.0, [0.6, 2.5], [-1.0, 1.0], 33, DerivativeMode::fd());
        let d = geodesic_distance(&c, &[FRAC_PI_2, -std::f64::consts::FRAC_PI_4], &[FRAC_PI_2, std::f64::consts::FRAC_PI_4])
            .unwrap();
        assert_eq!(d.method, DistanceMethod::Shooting);
        assert!((d.value - FRAC_PI_2).abs() < 1e-3, "{}", d.value);
    }

    #[test]
    fn off_equator_geodesic_is_shorter_than_the_latitude() {
        let c = fixtures::sphere_chart(1.0, [0.4, 2.7], [-1.0, 1.0], 33, DerivativeMode::Analytic);
        let (x, y) = ([1.0, -0.6], [1.0, 0.6]);
        let d = geodesic_distance(&c, &x, &y).unwrap().value;
        // closed form: cos d = cos²θ + sin²θ cos Δφ
        let t: f64 = 1.0;
        let exact = (t.cos().powi(2) + t.sin().powi(2) * 1.2f64.cos()).acos();
        assert!((d - exact).abs() < 1e-7, "{d} vs {exact}");
        assert!(d < segment_length(&c, &x, &y));
    }

    #[test]
    fn dijkstra_overestimates_mildly() {
        let c = fixtures::flat_chart(2, 0.0, 1.0, 21);
        let dist = dijkstra(&c, 0, None);
        let far = c.bounds.len() - 1;
        assert!((dist[far] - 2f64.sqrt()).abs() < 1e-12);
        let mask: Vec<bool> = (0..c.bounds.len()).map(|i| i != 1 && i != 21 && i != 22).collect();
        assert!(dijkstra(&c, 0, Some(&mask))[far].is_infinite());
    }

    #[test]
    fn balls_on_flat_and_scaled_charts() {
        let c = fixtures::flat_chart(2, -2.0, 2.0, 41);
        let ball = metric_ball(&c, &[0.0, 0.0], 1.0).unwrap();
        let expect: Vec<usize> = (0..c.bounds.len())
            .filter(|&i| {
                let p = c.bounds.point(i);
                (p[0] * p[0] + p[1] * p[1]).sqrt() <= 1.0
            })
            .collect();
        assert_eq!(ball.members, expect);
        assert!(!ball.truncated);

        let tiny = metric_ball(&c, &[0.03, 0.02], 0.01).unwrap();
        assert_eq!(tiny.members, vec![c.bounds.nearest(&[0.03, 0.02])]);

        let c4 = fixtures::conformal_chart(2, 4.0, -2.0, 2.0, 41);
        let b4 = metric_ball(&c4, &[0.0, 0.0], 1.0).unwrap();
        let expect: Vec<usize> = (0..c4.bounds.len())
            .filter(|&i| {
                let p = c4.bounds.point(i);
                (p[0] * p[0] + p[1] * p[1]).sqrt() <= 0.5
            })
            .collect();
        assert_eq!(b4.members, expect);

        let edge = metric_ball(&c, &[1.9, 0.0], 0.5).unwrap();
        assert!(edge.truncated);
    }

    #[test]
    fn balls_grow_with_radius() {
        let c = fixtures::hyperbolic_chart([-1.0, 1.0], [1.0, 3.0], 33, DerivativeMode::fd());
        let mut prev = 0;
        for r in [0.05, 0.1, 0.2, 0.3] {
            let b = metric_ball(&c, &[0.0, 2.0], r).unwrap();
            assert!(b.members.len() >= prev);
            prev = b.members.len();
        }
    }
}
