//! Volume-weighted Lᵖ norms and Hölder seminorms of grid fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geodesic;
use crate::grid::CoordinateBox;
use crate::map::MapModel;
use crate::metric::MetricChart;
use crate::Error;

/// Largest number of point pairs examined by [`holder_seminorm`] before it
/// switches to a seeded random subsample.
pub const MAX_HOLDER_PAIRS: usize = 1_000_000;

/// Inputs of one Lᵖ quadrature over a grid region.
#[derive(Clone, Copy, Debug)]
pub struct NormRequest<'a> {
    pub p: f64,
    pub grid: &'a CoordinateBox,
    /// Membership per grid node; `None` is the whole grid.
    pub region: Option<&'a [bool]>,
    /// Field samples per grid node.
    pub field: &'a [f64],
    /// `√det g` per grid node.
    pub volume_weight: &'a [f64],
}

pub fn check_exponent(p: f64) -> Result<(), Error> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::UnsupportedExponent(p))
    }
}

/// `(Σ |f|^p √det g · w)^{1/p}` with the trapezoid node weights `w` of the
/// grid restricted to the region.
pub fn lp_norm(req: &NormRequest) -> Result<f64, Error> {
    check_exponent(req.p)?;
    let len = req.grid.len();
    if req.field.len() != len || req.volume_weight.len() != len {
        return Err(Error::DimensionMismatch { expected: len, found: req.field.len() });
    }
    if let Some(r) = req.region {
        if !r.iter().any(|&b| b) {
            return Err(Error::InvalidArgument("empty integration region".into()));
        }
    }
    let mut s = 0.0;
    for i in 0..len {
        if req.region.is_some_and(|r| !r[i]) {
            continue;
        }
        s += req.field[i].abs().powf(req.p) * req.volume_weight[i] * req.grid.node_weight(i);
    }
    Ok(s.powf(1.0 / req.p))
}

/// Precomputed quadrature weights (node weight × volume density × optional
/// partition weight) for repeated norms on one chart.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn new(chart: &MetricChart, partition: Option<&[f64]>) -> Result<Self, Error> {
        let b = &chart.bounds;
        let mut weights = Vec::with_capacity(b.len());
        for (i, x) in b.points().enumerate() {
            let vol = chart.metric_at(&x)?.vol_density;
            let pw = partition.map_or(1.0, |p| p[i]);
            weights.push(b.node_weight(i) * vol * pw);
        }
        Ok(Quadrature { weights })
    }

    pub fn from_weights(weights: Vec<f64>) -> Self {
        Quadrature { weights }
    }

    /// `∫ |f|^p` over the region (no root taken).
    pub fn integral_pow(&self, field: &[f64], region: Option<&[bool]>, p: f64) -> f64 {
        let mut s = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            if region.is_some_and(|r| !r[i]) || *w == 0.0 {
                continue;
            }
            s += field[i].abs().powf(p) * w;
        }
        s
    }

    pub fn norm(&self, field: &[f64], region: Option<&[bool]>, p: f64) -> Result<f64, Error> {
        check_exponent(p)?;
        Ok(self.integral_pow(field, region, p).powf(1.0 / p))
    }

    pub fn volume(&self, region: Option<&[bool]>) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(i, _)| region.map_or(true, |r| r[*i]))
            .map(|(_, w)| w)
            .sum()
    }
}

/// `max |f(x) − f(y)| / |x − y|^α` over pairs of region nodes, with chart
/// coordinate distances. Exhaustive up to [`MAX_HOLDER_PAIRS`] pairs, then a
/// seeded random subsample of that many pairs.
pub fn holder_seminorm(grid: &CoordinateBox, field: &[f64], region: Option<&[bool]>, alpha: f64, seed: u64) -> Result<f64, Error> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("Hölder exponent must lie in (0, 1], got {alpha}")));
    }
    let idx: Vec<usize> = (0..grid.len()).filter(|&i| region.map_or(true, |r| r[i])).collect();
    let points: Vec<Vec<f64>> = idx.iter().map(|&i| grid.point(i)).collect();
    let values: Vec<f64> = idx.iter().map(|&i| field[i]).collect();
    Ok(holder_of_samples(&points, &values, alpha, seed))
}

/// Hölder quotient maximum over pairs of scattered samples.
pub fn holder_of_samples(points: &[Vec<f64>], values: &[f64], alpha: f64, seed: u64) -> f64 {
    let k = points.len();
    if k < 2 {
        return 0.0;
    }
    let quotient = |a: usize, b: usize| {
        let d2: f64 = points[a].iter().zip(&points[b]).map(|(x, y)| (x - y) * (x - y)).sum();
        if d2 == 0.0 {
            return 0.0;
        }
        (values[a] - values[b]).abs() / d2.powf(0.5 * alpha)
    };
    let mut best = 0.0f64;
    if k * (k - 1) / 2 <= MAX_HOLDER_PAIRS {
        for a in 0..k {
            for b in (a + 1)..k {
                best = best.max(quotient(a, b));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_HOLDER_PAIRS {
            let a = rng.gen_range(0..k);
            let b = rng.gen_range(0..k);
            best = best.max(quotient(a, b));
        }
    }
    best
}

/// `dist_N(u(x), o)` at every source node.
pub fn dist_to_basepoint_field(map: &MapModel, o: &[f64]) -> Result<Vec<f64>, Error> {
    let images: Vec<Vec<f64>> = map
        .source
        .bounds
        .points()
        .map(|x| map.image(&x))
        .collect::<Result<_, _>>()?;
    geodesic::distances_from(&map.target, o, &images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn ones(b: &CoordinateBox) -> Vec<f64> {
        vec![1.0; b.len()]
    }

    #[test]
    fn constant_on_unit_square() {
        let c = fixtures::flat_chart(2, 0.0, 1.0, 11);
        let q = Quadrature::new(&c, None).unwrap();
        assert!((q.norm(&ones(&c.bounds), None, 2.0).unwrap() - 1.0).abs() < 1e-12);
        let c4 = fixtures::conformal_chart(2, 4.0, 0.0, 1.0, 11);
        let b = &c4.bounds;
        let vol: Vec<f64> = b.points().map(|x| c4.metric_at(&x).unwrap().vol_density).collect();
        let req = NormRequest { p: 2.0, grid: b, region: None, field: &ones(b), volume_weight: &vol };
        assert!((lp_norm(&req).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_field_in_one_dimension() {
        let b = CoordinateBox::uniform(vec![0.0], vec![1.0], 65).unwrap();
        let f: Vec<f64> = b.points().map(|x| x[0]).collect();
        let vol = ones(&b);
        let req = NormRequest { p: 2.0, grid: &b, region: None, field: &f, volume_weight: &vol };
        assert!((lp_norm(&req).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn exponent_and_region_checks() {
        let b = CoordinateBox::uniform(vec![0.0], vec![1.0], 5).unwrap();
        let f = ones(&b);
        let req = NormRequest { p: 1.0, grid: &b, region: None, field: &f, volume_weight: &f };
        assert!(matches!(lp_norm(&req), Err(Error::UnsupportedExponent(_))));
        let empty = vec![false; 5];
        let req = NormRequest { p: 2.0, region: Some(&empty), ..req };
        assert!(lp_norm(&req).is_err());
    }

    #[test]
    fn holder_examples() {
        let b = CoordinateBox::uniform(vec![0.0], vec![1.0], 101).unwrap();
        let c = vec![3.0; b.len()];
        assert_eq!(holder_seminorm(&b, &c, None, 0.5, 0).unwrap(), 0.0);
        let lin: Vec<f64> = b.points().map(|x| x[0]).collect();
        assert!((holder_seminorm(&b, &lin, None, 1.0, 0).unwrap() - 1.0).abs() < 1e-12);
        let root: Vec<f64> = b.points().map(|x| x[0].sqrt()).collect();
        let h = holder_seminorm(&b, &root, None, 0.5, 0).unwrap();
        assert!(h <= 1.0 + 1e-12 && h > 0.999, "{h}");
    }

    #[test]
    fn basepoint_distance_fields() {
        let id = fixtures::identity_map(2, -1.0, 1.0, 9);
        let d = dist_to_basepoint_field(&id, &[0.0, 0.0]).unwrap();
        for (x, v) in id.source.bounds.points().zip(&d) {
            assert!((v - (x[0] * x[0] + x[1] * x[1]).sqrt()).abs() < 1e-15);
        }
    }
}
