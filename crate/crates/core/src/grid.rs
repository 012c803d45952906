//! Rectangular coordinate boxes sampled on uniform grids.
//!
//! Nodes are indexed row-major with the last axis varying fastest.

use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: Vec<usize>,
}

impl CoordinateBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, resolution: Vec<usize>) -> Result<Self, Error> {
        let b = CoordinateBox { lower, upper, resolution };
        b.validate()?;
        Ok(b)
    }

    /// Same resolution along every axis.
    pub fn uniform(lower: Vec<f64>, upper: Vec<f64>, n: usize) -> Result<Self, Error> {
        let m = lower.len();
        Self::new(lower, upper, vec![n; m])
    }

    pub fn validate(&self) -> Result<(), Error> {
        let m = self.lower.len();
        if m == 0 {
            return Err(Error::InvalidBox("dimension must be positive".into()));
        }
        if self.upper.len() != m || self.resolution.len() != m {
            return Err(Error::InvalidBox(format!(
                "lower, upper and resolution must all have length {m}"
            )));
        }
        for k in 0..m {
            if !(self.lower[k] < self.upper[k]) || !self.lower[k].is_finite() || !self.upper[k].is_finite() {
                return Err(Error::InvalidBox(format!(
                    "axis {k}: need finite lower < upper, got [{}, {}]",
                    self.lower[k], self.upper[k]
                )));
            }
            if self.resolution[k] < 3 {
                return Err(Error::InvalidBox(format!(
                    "axis {k}: resolution {} is below 3",
                    self.resolution[k]
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    pub fn step(&self, k: usize) -> f64 {
        self.width(k) / (self.resolution[k] - 1) as f64
    }

    pub fn steps(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.step(k)).collect()
    }

    pub fn max_step(&self) -> f64 {
        self.steps().into_iter().fold(0.0, f64::max)
    }

    pub fn min_step(&self) -> f64 {
        self.steps().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.steps().iter().product()
    }

    pub fn coord(&self, k: usize, i: usize) -> f64 {
        if i + 1 == self.resolution[k] {
            self.upper[k]
        } else {
            self.lower[k] + i as f64 * self.step(k)
        }
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let m = self.dim();
        let mut out = vec![0; m];
        for k in (0..m).rev() {
            out[k] = idx % self.resolution[k];
            idx /= self.resolution[k];
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.resolution).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mi = self.multi_index(idx);
        mi.iter().enumerate().map(|(k, &i)| self.coord(k, i)).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_with_slack(x, 0.0)
    }

    /// Inside the box enlarged by `slack` times each step.
    pub fn contains_with_slack(&self, x: &[f64], slack: f64) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(k, &v)| {
                let s = slack * self.step(k) + 1e-12 * self.width(k);
                v >= self.lower[k] - s && v <= self.upper[k] + s
            })
    }

    pub fn nearest(&self, x: &[f64]) -> usize {
        let multi: Vec<usize> = x
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let t = ((v - self.lower[k]) / self.step(k)).round();
                t.clamp(0.0, (self.resolution[k] - 1) as f64) as usize
            })
            .collect();
        self.flat_index(&multi)
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.multi_index(idx)
            .iter()
            .zip(&self.resolution)
            .any(|(&i, &n)| i == 0 || i + 1 == n)
    }

    /// Neighbour of `idx` displaced by `delta`, if inside the grid.
    pub fn offset(&self, idx: usize, delta: &[i64]) -> Option<usize> {
        let mi = self.multi_index(idx);
        let mut out = Vec::with_capacity(mi.len());
        for (k, (&i, &d)) in mi.iter().zip(delta).enumerate() {
            let j = i as i64 + d;
            if j < 0 || j >= self.resolution[k] as i64 {
                return None;
            }
            out.push(j as usize);
        }
        Some(self.flat_index(&out))
    }

    /// All nonzero offsets in {-1,0,1}^m (8 in 2D, 26 in 3D).
    pub fn neighbor_offsets(&self) -> Vec<Vec<i64>> {
        let m = self.dim();
        let mut out = Vec::new();
        for code in 0..3usize.pow(m as u32) {
            let mut c = code;
            let mut d = vec![0i64; m];
            for v in d.iter_mut() {
                *v = (c % 3) as i64 - 1;
                c /= 3;
            }
            if d.iter().any(|&v| v != 0) {
                out.push(d);
            }
        }
        out
    }

    /// The nested grid with every step halved.
    pub fn refined(&self) -> CoordinateBox {
        CoordinateBox {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            resolution: self.resolution.iter().map(|n| 2 * n - 1).collect(),
        }
    }

    pub fn with_resolution(&self, n: usize) -> CoordinateBox {
        CoordinateBox {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            resolution: vec![n; self.dim()],
        }
    }

    /// Trapezoid weights (before the volume density): each node receives the
    /// cell volume times the fraction of its adjacent cells, `count / 2^m`.
    pub fn node_weight(&self, idx: usize) -> f64 {
        let mi = self.multi_index(idx);
        let mut w = self.cell_volume();
        for (&i, &n) in mi.iter().zip(&self.resolution) {
            if i == 0 || i + 1 == n {
                w *= 0.5;
            }
        }
        w
    }

    /// Node weights restricted to a region. Every cell contributes
    /// `cell_volume / 2^m` per vertex lying in the region, so a partially
    /// covered boundary cell is counted by its vertex-inclusion fraction.
    pub fn region_weights(&self, region: &[bool]) -> Vec<f64> {
        (0..self.len())
            .map(|i| if region[i] { self.node_weight(i) } else { 0.0 })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_boxes() {
        assert!(CoordinateBox::new(vec![0.0], vec![0.0], vec![5]).is_err());
        assert!(CoordinateBox::new(vec![0.0], vec![1.0], vec![2]).is_err());
        assert!(CoordinateBox::new(vec![0.0, 0.0], vec![1.0], vec![5, 5]).is_err());
    }

    #[test]
    fn indexing_round_trips() {
        let b = CoordinateBox::new(vec![0.0, -1.0, 2.0], vec![1.0, 1.0, 3.0], vec![3, 4, 5]).unwrap();
        for idx in 0..b.len() {
            assert_eq!(b.flat_index(&b.multi_index(idx)), idx);
            assert_eq!(b.nearest(&b.point(idx)), idx);
        }
        assert_eq!(b.point(b.len() - 1), vec![1.0, 1.0, 3.0]);
        assert_eq!(b.neighbor_offsets().len(), 26);
    }

    #[test]
    fn refinement_nests_nodes() {
        let b = CoordinateBox::uniform(vec![0.1, -0.7], vec![0.9, 1.3], 7).unwrap();
        let r = b.refined();
        for idx in 0..b.len() {
            let mi: Vec<usize> = b.multi_index(idx).iter().map(|i| 2 * i).collect();
            assert_eq!(r.point(r.flat_index(&mi)), b.point(idx));
        }
    }

    #[test]
    fn weights_sum_to_volume() {
        let b = CoordinateBox::uniform(vec![0.0, 0.0], vec![2.0, 3.0], 9).unwrap();
        let total: f64 = (0..b.len()).map(|i| b.node_weight(i)).sum();
        assert!((total - 6.0).abs() < 1e-12);
        let full = b.region_weights(&vec![true; b.len()]);
        for i in 0..b.len() {
            assert!((full[i] - b.node_weight(i)).abs() < 1e-14);
        }
    }
}
