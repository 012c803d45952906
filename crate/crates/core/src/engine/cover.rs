//! Greedy ball covers of a chart grid with measured overlap.

use serde::Serialize;

use crate::geodesic::{ball_extent, metric_step, segment_ball};
use crate::metric::MetricChart;
use crate::Error;

#[derive(Clone, Debug, Serialize)]
pub struct Cover {
    pub r_hat: f64,
    /// Grid indices of the centers.
    pub centers: Vec<usize>,
    /// Smallest `Σ_j 1_{B_{r̂/8}(x_j)}` over grid nodes.
    pub min_coverage: u32,
    /// Largest `Σ_j 1_{B_{r̂}(x_j)}` over grid nodes.
    pub multiplicity: u32,
}

impl Cover {
    /// Every grid node lies in some `B_{r̂/8}(x_j)`.
    pub fn is_cover(&self) -> bool {
        self.min_coverage >= 1
    }
}

/// Greedy maximal `r̂/16`-separated set of grid nodes (in grid order), with
/// the coverage by `r̂/8`-balls and the multiplicity of the `r̂`-balls
/// counted node by node. Distances are coordinate segment lengths, exact for
/// constant metrics. `r̂` must exceed the metric length of a grid step.
pub fn build_cover(chart: &MetricChart, r_hat: f64) -> Result<Cover, Error> {
    let b = &chart.bounds;
    let step = metric_step(chart)?;
    if !(r_hat > step) {
        return Err(Error::ResolutionTooCoarse { r_hat, step });
    }
    let sep = r_hat / 16.0;
    let sep_extent = ball_extent(chart, sep)?;
    let mut blocked = vec![false; b.len()];
    let mut centers = Vec::new();
    for i in 0..b.len() {
        if blocked[i] {
            continue;
        }
        centers.push(i);
        for (j, _) in segment_ball(chart, &b.point(i), sep, &sep_extent) {
            blocked[j] = true;
        }
    }
    let extent = ball_extent(chart, r_hat)?;
    let mut small = vec![0u32; b.len()];
    let mut large = vec![0u32; b.len()];
    for &c in &centers {
        for (j, d) in segment_ball(chart, &b.point(c), r_hat, &extent) {
            large[j] += 1;
            if d <= r_hat / 8.0 {
                small[j] += 1;
            }
        }
    }
    Ok(Cover {
        r_hat,
        centers,
        min_coverage: small.iter().copied().min().unwrap_or(0),
        multiplicity: large.iter().copied().max().unwrap_or(0),
    })
}

/// The same construction on an explicit point set with a distance function.
pub fn build_cover_points(points: &[Vec<f64>], r_hat: f64, dist: impl Fn(&[f64], &[f64]) -> f64) -> Cover {
    let sep = r_hat / 16.0;
    let mut centers: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if centers.iter().all(|&c| dist(&points[c], p) > sep) {
            centers.push(i);
        }
    }
    let mut min_coverage = u32::MAX;
    let mut multiplicity = 0;
    for p in points {
        let (mut s, mut l) = (0u32, 0u32);
        for &c in &centers {
            let d = dist(&points[c], p);
            s += (d <= r_hat / 8.0) as u32;
            l += (d <= r_hat) as u32;
        }
        min_coverage = min_coverage.min(s);
        multiplicity = multiplicity.max(l);
    }
    Cover { r_hat, centers, min_coverage, multiplicity }
}
