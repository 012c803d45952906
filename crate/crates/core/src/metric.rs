//! Riemannian metrics on coordinate charts: metric matrices, Christoffel
//! symbols, Ricci samples, and manifold models built from atlases of charts.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::engine::Extended;
use crate::field::{self, fd_gradient, fd_jet, Field, Jet, ScalarField};
use crate::grid::CoordinateBox;
use crate::Error;

/// How derivatives of metric components (and map components) are obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DerivativeMode {
    /// Exact derivatives from the field's jet (automatic differentiation for
    /// expression fields).
    Analytic,
    /// Second-order finite differences; the default step is the grid step.
    FiniteDifference { step: Option<Vec<f64>> },
}

impl DerivativeMode {
    pub fn fd() -> Self {
        DerivativeMode::FiniteDifference { step: None }
    }

    pub fn steps(&self, bounds: &CoordinateBox) -> Vec<f64> {
        match self {
            DerivativeMode::FiniteDifference { step: Some(s) } => s.clone(),
            _ => bounds.steps(),
        }
    }

    /// Jet of `f` at `x` per this mode.
    pub fn jet(&self, f: &dyn ScalarField, x: &[f64], bounds: &CoordinateBox) -> Result<Jet, Error> {
        match self {
            DerivativeMode::Analytic => {
                f.jet(x).ok_or_else(|| Error::NoAnalyticOracle(f.describe()))
            }
            DerivativeMode::FiniteDifference { .. } => fd_jet(f, x, &self.steps(bounds), bounds),
        }
    }

    pub fn gradient(&self, f: &dyn ScalarField, x: &[f64], bounds: &CoordinateBox) -> Result<Vec<f64>, Error> {
        match self {
            DerivativeMode::Analytic => f
                .jet(x)
                .map(|j| j.gradient)
                .ok_or_else(|| Error::NoAnalyticOracle(f.describe())),
            DerivativeMode::FiniteDifference { .. } => fd_gradient(f, x, &self.steps(bounds), bounds),
        }
    }
}

/// Metric data at one point.
#[derive(Clone, Debug)]
pub struct MetricSample {
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub vol_density: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Index of `(i, j)` in the packed upper triangle of an `m × m` matrix.
pub fn tri(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * m - i * (i + 1) / 2 + j
}

/// Multiplies a field by a constant.
struct Scaled(Field, f64);

impl ScalarField for Scaled {
    fn value(&self, x: &[f64]) -> f64 {
        self.1 * self.0.value(x)
    }

    fn jet(&self, x: &[f64]) -> Option<Jet> {
        self.0.jet(x).map(|mut j| {
            j.value *= self.1;
            j.gradient.iter_mut().for_each(|v| *v *= self.1);
            j.hessian.iter_mut().for_each(|v| *v *= self.1);
            j
        })
    }

    fn constant_value(&self) -> Option<f64> {
        self.0.constant_value().map(|c| c * self.1)
    }

    fn describe(&self) -> String {
        format!("{} * ({})", self.1, self.0.describe())
    }
}

pub struct MetricChart {
    pub name: String,
    pub bounds: CoordinateBox,
    pub mode: DerivativeMode,
    components: Vec<Field>,
    constant: Option<DMatrix<f64>>,
    ellipticity: OnceLock<(f64, f64)>,
}

impl std::fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricChart")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("mode", &self.mode)
            .field("components", &self.components.iter().map(|c| c.describe()).collect::<Vec<_>>())
            .finish()
    }
}

impl MetricChart {
    /// Builds a chart from the packed upper triangle `g_00, g_01, ..., g_mm`.
    pub fn from_upper(
        name: impl Into<String>,
        bounds: CoordinateBox,
        upper: Vec<Field>,
        mode: DerivativeMode,
    ) -> Result<Self, Error> {
        let m = bounds.dim();
        if upper.len() != m * (m + 1) / 2 {
            return Err(Error::DimensionMismatch { expected: m * (m + 1) / 2, found: upper.len() });
        }
        let constant = upper
            .iter()
            .map(|c| c.constant_value())
            .collect::<Option<Vec<f64>>>()
            .map(|vals| DMatrix::from_fn(m, m, |i, j| vals[tri(m, i, j)]));
        Ok(MetricChart {
            name: name.into(),
            bounds,
            mode,
            components: upper,
            constant,
            ellipticity: OnceLock::new(),
        })
    }

    /// Builds a chart from a full component matrix, checking `g_ij = g_ji`
    /// at every grid node.
    pub fn from_matrix(
        name: impl Into<String>,
        bounds: CoordinateBox,
        matrix: Vec<Vec<Field>>,
        mode: DerivativeMode,
    ) -> Result<Self, Error> {
        let m = bounds.dim();
        if matrix.len() != m || matrix.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, found: matrix.len() });
        }
        for i in 0..m {
            for j in (i + 1)..m {
                if Arc::ptr_eq(&matrix[i][j], &matrix[j][i]) {
                    continue;
                }
                for x in bounds.points() {
                    let (a, b) = (matrix[i][j].value(&x), matrix[j][i].value(&x));
                    if a != b {
                        return Err(Error::SymmetryViolation { i, j, point: x });
                    }
                }
            }
        }
        let mut upper = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in i..m {
                upper.push(matrix[i][j].clone());
            }
        }
        Self::from_upper(name, bounds, upper, mode)
    }

    pub fn constant(name: impl Into<String>, bounds: CoordinateBox, g: &DMatrix<f64>) -> Result<Self, Error> {
        let m = bounds.dim();
        let mut upper = Vec::new();
        for i in 0..m {
            for j in i..m {
                upper.push(field::constant(g[(i, j)]));
            }
        }
        Self::from_upper(name, bounds, upper, DerivativeMode::Analytic)
    }

    pub fn euclidean(name: impl Into<String>, bounds: CoordinateBox) -> Result<Self, Error> {
        let m = bounds.dim();
        Self::constant(name, bounds, &DMatrix::identity(m, m))
    }

    /// Same metric on a different grid.
    pub fn with_bounds(&self, bounds: CoordinateBox) -> MetricChart {
        MetricChart {
            name: self.name.clone(),
            bounds,
            mode: match &self.mode {
                DerivativeMode::FiniteDifference { .. } => DerivativeMode::fd(),
                m => m.clone(),
            },
            components: self.components.clone(),
            constant: self.constant.clone(),
            ellipticity: OnceLock::new(),
        }
    }

    pub fn with_resolution(&self, n: usize) -> MetricChart {
        self.with_bounds(self.bounds.with_resolution(n))
    }

    pub fn with_mode(&self, mode: DerivativeMode) -> MetricChart {
        let mut c = self.with_bounds(self.bounds.clone());
        c.mode = mode;
        c
    }

    /// The metric `factor · g` on the same grid.
    pub fn scaled(&self, factor: f64) -> MetricChart {
        MetricChart {
            name: format!("{}*{}", factor, self.name),
            bounds: self.bounds.clone(),
            mode: self.mode.clone(),
            components: self
                .components
                .iter()
                .map(|c| Arc::new(Scaled(c.clone(), factor)) as Field)
                .collect(),
            constant: self.constant.as_ref().map(|g| g * factor),
            ellipticity: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn component(&self, i: usize, j: usize) -> &Field {
        &self.components[tri(self.dim(), i, j)]
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    pub fn constant_matrix(&self) -> Option<&DMatrix<f64>> {
        self.constant.as_ref()
    }

    fn check_inside(&self, x: &[f64]) -> Result<(), Error> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        if !self.bounds.contains_with_slack(x, 1e-6) {
            return Err(Error::OutsideChart { chart: self.name.clone(), point: x.to_vec() });
        }
        Ok(())
    }

    /// Metric matrix without any checks.
    pub fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        if let Some(g) = &self.constant {
            return g.clone();
        }
        let m = self.dim();
        let vals: Vec<f64> = self.components.iter().map(|c| c.value(x)).collect();
        DMatrix::from_fn(m, m, |i, j| vals[tri(m, i, j)])
    }

    /// `|v|_g` for a coordinate vector `v` at `x`.
    pub fn norm(&self, x: &[f64], v: &[f64]) -> f64 {
        let g = self.matrix(x);
        let m = self.dim();
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += g[(i, j)] * v[i] * v[j];
            }
        }
        s.max(0.0).sqrt()
    }

    pub fn metric_at(&self, x: &[f64]) -> Result<MetricSample, Error> {
        self.check_inside(x)?;
        sample_from_matrix(self.matrix(x), x)
    }

    /// `(λ_min, λ_max)` of `g` over all grid nodes, cached.
    pub fn ellipticity(&self) -> Result<(f64, f64), Error> {
        if let Some(v) = self.ellipticity.get() {
            return Ok(*v);
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        if let Some(g) = &self.constant {
            let s = sample_from_matrix(g.clone(), &self.bounds.lower)?;
            lo = s.lambda_min;
            hi = s.lambda_max;
        } else {
            for x in self.bounds.points() {
                let s = self.metric_at(&x)?;
                lo = lo.min(s.lambda_min);
                hi = hi.max(s.lambda_max);
            }
        }
        Ok(*self.ellipticity.get_or_init(|| (lo, hi)))
    }

    /// `dg[k][c] = ∂_k g_c` for each packed component `c`.
    fn metric_gradients(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, Error> {
        let m = self.dim();
        let mut dg = vec![vec![0.0; self.components.len()]; m];
        for (c, comp) in self.components.iter().enumerate() {
            let grad = self.mode.gradient(comp.as_ref(), x, &self.bounds)?;
            for k in 0..m {
                dg[k][c] = grad[k];
            }
        }
        Ok(dg)
    }

    /// `Γ^l_ij` at `x`, stored as `gamma[(l * m + i) * m + j]`.
    pub fn christoffel_at(&self, x: &[f64]) -> Result<Vec<f64>, Error> {
        let m = self.dim();
        if self.constant.is_some() {
            self.check_inside(x)?;
            return Ok(vec![0.0; m * m * m]);
        }
        let sample = self.metric_at(x)?;
        let dg = self.metric_gradients(x)?;
        Ok(christoffel_from(m, &sample.ginv, |k, i, j| dg[k][tri(m, i, j)]))
    }

    /// Ricci tensor at `x` from first and second metric derivatives.
    pub fn ricci_at(&self, x: &[f64]) -> Result<DMatrix<f64>, Error> {
        let m = self.dim();
        if self.constant.is_some() {
            self.check_inside(x)?;
            return Ok(DMatrix::zeros(m, m));
        }
        let sample = self.metric_at(x)?;
        let jets: Vec<Jet> = self
            .components
            .iter()
            .map(|c| self.mode.jet(c.as_ref(), x, &self.bounds))
            .collect::<Result<_, _>>()?;
        let dg = |k: usize, i: usize, j: usize| jets[tri(m, i, j)].gradient[k];
        let ddg = |k: usize, p: usize, i: usize, j: usize| jets[tri(m, i, j)].hessian[k * m + p];
        let ginv = &sample.ginv;
        let gamma = christoffel_from(m, ginv, dg);
        let gm = |l: usize, i: usize, j: usize| gamma[(l * m + i) * m + j];
        // ∂_p g^{lk} = -g^{la} ∂_p g_ab g^{bk}
        let mut dginv = vec![0.0; m * m * m];
        for p in 0..m {
            for l in 0..m {
                for k in 0..m {
                    let mut s = 0.0;
                    for a in 0..m {
                        for b in 0..m {
                            s -= ginv[(l, a)] * dg(p, a, b) * ginv[(b, k)];
                        }
                    }
                    dginv[(p * m + l) * m + k] = s;
                }
            }
        }
        // ∂_p Γ^l_ij
        let dgamma = |p: usize, l: usize, i: usize, j: usize| {
            let mut s = 0.0;
            for k in 0..m {
                let sk = dg(i, j, k) + dg(j, i, k) - dg(k, i, j);
                let dsk = ddg(p, i, j, k) + ddg(p, j, i, k) - ddg(p, k, i, j);
                s += dginv[(p * m + l) * m + k] * sk + ginv[(l, k)] * dsk;
            }
            0.5 * s
        };
        let mut ric = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for l in 0..m {
                    s += dgamma(l, l, i, j) - dgamma(j, l, i, l);
                    for k in 0..m {
                        s += gm(l, l, k) * gm(k, i, j) - gm(l, j, k) * gm(k, i, l);
                    }
                }
                ric[(i, j)] = s;
                ric[(j, i)] = s;
            }
        }
        Ok(ric)
    }

    /// Christoffel symbols at every grid node.
    pub fn christoffel(&self) -> Result<ChristoffelField, Error> {
        let m = self.dim();
        let mut values = Vec::with_capacity(self.bounds.len() * m * m * m);
        for x in self.bounds.points() {
            values.extend(self.christoffel_at(&x)?);
        }
        Ok(ChristoffelField { bounds: self.bounds.clone(), values })
    }

    /// Ricci tensor and its smallest eigenvalue relative to `g` at every node.
    pub fn ricci_samples(&self) -> Result<Vec<RicciSample>, Error> {
        self.bounds
            .points()
            .map(|x| {
                let ric = self.ricci_at(&x)?;
                let g = self.metric_at(&x)?.g;
                let eig = relative_eigenvalues(&ric, &g);
                let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
                let max_eigenvalue = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok(RicciSample { point: x, ricci: ric, min_eigenvalue, max_eigenvalue })
            })
            .collect()
    }
}

pub(crate) fn sample_from_matrix(g: DMatrix<f64>, x: &[f64]) -> Result<MetricSample, Error> {
    let eig = SymmetricEigen::new(g.clone()).eigenvalues;
    let lambda_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lambda_min > 0.0) || !lambda_max.is_finite() {
        return Err(Error::DegenerateMetric { point: x.to_vec(), min_eigenvalue: lambda_min });
    }
    let chol = g.clone().cholesky().ok_or_else(|| Error::DegenerateMetric {
        point: x.to_vec(),
        min_eigenvalue: lambda_min,
    })?;
    let ginv = chol.inverse();
    let ginv = (&ginv + ginv.transpose()) * 0.5;
    let vol_density = g.determinant().sqrt();
    Ok(MetricSample { g, ginv, vol_density, lambda_min, lambda_max })
}

/// `Γ^l_ij = ½ g^{lk}(∂_i g_jk + ∂_j g_ik − ∂_k g_ij)` given `dg(k, i, j) = ∂_k g_ij`.
pub(crate) fn christoffel_from(m: usize, ginv: &DMatrix<f64>, dg: impl Fn(usize, usize, usize) -> f64) -> Vec<f64> {
    let mut gamma = vec![0.0; m * m * m];
    for i in 0..m {
        for j in i..m {
            for l in 0..m {
                let mut s = 0.0;
                for k in 0..m {
                    s += ginv[(l, k)] * (dg(i, j, k) + dg(j, i, k) - dg(k, i, j));
                }
                gamma[(l * m + i) * m + j] = 0.5 * s;
                gamma[(l * m + j) * m + i] = 0.5 * s;
            }
        }
    }
    gamma
}

/// Eigenvalues of the symmetric form `a` relative to the SPD form `g`.
pub fn relative_eigenvalues(a: &DMatrix<f64>, g: &DMatrix<f64>) -> Vec<f64> {
    let l = g.clone().cholesky().expect("metric is SPD").l();
    let linv = l.clone().try_inverse().expect("cholesky factor is invertible");
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    SymmetricEigen::new(c).eigenvalues.iter().copied().collect()
}

#[derive(Clone, Debug)]
pub struct RicciSample {
    pub point: Vec<f64>,
    pub ricci: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Christoffel symbols sampled at grid nodes.
#[derive(Clone, Debug)]
pub struct ChristoffelField {
    pub bounds: CoordinateBox,
    values: Vec<f64>,
}

impl ChristoffelField {
    fn block(&self) -> usize {
        let m = self.bounds.dim();
        m * m * m
    }

    pub fn at_node(&self, idx: usize) -> &[f64] {
        let b = self.block();
        &self.values[idx * b..(idx + 1) * b]
    }

    pub fn get(&self, idx: usize, l: usize, i: usize, j: usize) -> f64 {
        let m = self.bounds.dim();
        self.at_node(idx)[(l * m + i) * m + j]
    }

    /// Hilbert–Schmidt norm of the matrix `(Γ^l_ij)_ij` for each `l`.
    pub fn hs_norms(&self, idx: usize) -> Vec<f64> {
        let m = self.bounds.dim();
        let g = self.at_node(idx);
        (0..m)
            .map(|l| g[l * m * m..(l + 1) * m * m].iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Multilinear interpolation of all symbols at `x`; `None` outside the grid.
    pub fn interpolate(&self, x: &[f64]) -> Option<Vec<f64>> {
        let m = self.bounds.dim();
        if !self.bounds.contains(x) {
            return None;
        }
        let mut base = Vec::with_capacity(m);
        let mut frac = Vec::with_capacity(m);
        for k in 0..m {
            let t = (x[k] - self.bounds.lower[k]) / self.bounds.step(k);
            let i = (t.floor() as usize).min(self.bounds.resolution[k] - 2);
            base.push(i);
            frac.push((t - i as f64).clamp(0.0, 1.0));
        }
        let b = self.block();
        let mut out = vec![0.0; b];
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
            let node = self.at_node(self.bounds.flat_index(&mi));
            for (o, v) in out.iter_mut().zip(node) {
                *o += w * v;
            }
        }
        Some(out)
    }
}

/// A chart of an atlas together with its partition-of-unity weight.
#[derive(Clone, Debug)]
pub struct AtlasChart {
    pub chart: Arc<MetricChart>,
    /// Weight of this chart in global integrals; `None` means 1.
    pub partition: Option<Field>,
}

#[derive(Clone, Debug)]
pub struct ManifoldModel {
    pub name: String,
    pub dimension: usize,
    pub atlas: Vec<AtlasChart>,
    pub ricci_lower_bound: f64,
    pub base_points: Vec<Vec<f64>>,
    /// Declared C^{1,1/2} harmonic radius, when known in closed form.
    pub harmonic_radius: Option<Extended>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RicciWarning {
    pub chart: String,
    pub point: Vec<f64>,
    pub min_eigenvalue: f64,
    pub tolerance: f64,
}

impl ManifoldModel {
    pub fn single(name: impl Into<String>, chart: MetricChart, ricci_lower_bound: f64) -> Self {
        let dimension = chart.dim();
        ManifoldModel {
            name: name.into(),
            dimension,
            atlas: vec![AtlasChart { chart: Arc::new(chart), partition: None }],
            ricci_lower_bound,
            base_points: Vec::new(),
            harmonic_radius: None,
        }
    }

    pub fn with_base_points(mut self, points: Vec<Vec<f64>>) -> Self {
        self.base_points = points;
        self
    }

    pub fn with_harmonic_radius(mut self, r: Extended) -> Self {
        self.harmonic_radius = Some(r);
        self
    }

    pub fn chart(&self) -> &Arc<MetricChart> {
        &self.atlas[0].chart
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.ricci_lower_bound >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Ricci lower bound parameter must be nonnegative, got {}",
                self.ricci_lower_bound
            )));
        }
        if self.atlas.is_empty() {
            return Err(Error::InvalidArgument(format!("manifold '{}' has no charts", self.name)));
        }
        for a in &self.atlas {
            if a.chart.dim() != self.dimension {
                return Err(Error::DimensionMismatch { expected: self.dimension, found: a.chart.dim() });
            }
            a.chart.ellipticity()?;
        }
        for p in &self.base_points {
            if p.len() != self.dimension {
                return Err(Error::DimensionMismatch { expected: self.dimension, found: p.len() });
            }
        }
        Ok(())
    }

    /// Grid nodes where the sampled Ricci curvature drops below `-A - tol`,
    /// with `tol = 1e-4 (1 + A)`.
    pub fn ricci_warnings(&self) -> Result<Vec<RicciWarning>, Error> {
        let a = self.ricci_lower_bound;
        let tolerance = 1e-4 * (1.0 + a.abs());
        let mut out = Vec::new();
        for c in &self.atlas {
            for s in c.chart.ricci_samples()? {
                if s.min_eigenvalue < -a - tolerance {
                    out.push(RicciWarning {
                        chart: c.chart.name.clone(),
                        point: s.point,
                        min_eigenvalue: s.min_eigenvalue,
                        tolerance,
                    });
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn flat_and_conformal_samples() {
        let flat = fixtures::flat_chart(2, -1.0, 1.0, 9);
        let s = flat.metric_at(&[0.3, -0.2]).unwrap();
        assert_eq!(s.g, DMatrix::identity(2, 2));
        assert_eq!(s.ginv, DMatrix::identity(2, 2));
        assert_eq!((s.vol_density, s.lambda_min, s.lambda_max), (1.0, 1.0, 1.0));

        let four = fixtures::conformal_chart(2, 4.0, -1.0, 1.0, 9);
        let s = four.metric_at(&[0.0, 0.0]).unwrap();
        assert!((&s.ginv - DMatrix::identity(2, 2) * 0.25).abs().max() < 1e-15);
        assert!((s.vol_density - 4.0).abs() < 1e-14);
        assert!((&s.ginv * &s.g - DMatrix::identity(2, 2)).abs().max() < 1e-12);
        assert!(four.christoffel().unwrap().max_abs() == 0.0);
    }

    #[test]
    fn degenerate_metric_is_reported() {
        let b = CoordinateBox::uniform(vec![-1.0, -1.0], vec![1.0, 1.0], 5).unwrap();
        let c = MetricChart::from_upper(
            "bad",
            b,
            vec![
                field::expr("x", &["x", "y"]).unwrap(),
                field::constant(0.0),
                field::constant(1.0),
            ],
            DerivativeMode::Analytic,
        )
        .unwrap();
        assert!(matches!(c.metric_at(&[-0.5, 0.0]), Err(Error::DegenerateMetric { .. })));
        assert!(c.ellipticity().is_err());
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let b = CoordinateBox::uniform(vec![0.0, 0.0], vec![1.0, 1.0], 5).unwrap();
        let v = ["x", "y"];
        let m = vec![
            vec![field::constant(1.0), field::expr("0.1*x", &v).unwrap()],
            vec![field::expr("0.1*y", &v).unwrap(), field::constant(1.0)],
        ];
        let err = MetricChart::from_matrix("asym", b, m, DerivativeMode::Analytic).unwrap_err();
        assert!(matches!(err, Error::SymmetryViolation { i: 0, j: 1, .. }));
    }

    #[test]
    fn sphere_christoffels_match_closed_form() {
        for mode in [DerivativeMode::Analytic, DerivativeMode::fd()] {
            let c = fixtures::sphere_chart(1.0, [0.3, 2.8], [-1.0, 1.0], 129, mode);
            let t = FRAC_PI_4;
            let g = c.christoffel_at(&[t, 0.2]).unwrap();
            // index (l*m + i)*m + j with θ = 0, φ = 1
            assert!((g[3] + 0.5).abs() < 5e-4, "Γ^θ_φφ = {}", g[3]);
            assert!((g[5] - 1.0).abs() < 5e-4, "Γ^φ_θφ = {}", g[5]);
            assert_eq!(g[5], g[6]);
        }
    }

    #[test]
    fn ricci_of_model_spaces() {
        let s = fixtures::sphere_chart(1.0, [0.5, 2.6], [-1.0, 1.0], 33, DerivativeMode::Analytic);
        let ric = s.ricci_at(&[1.0, 0.1]).unwrap();
        let g = s.matrix(&[1.0, 0.1]);
        assert!((ric - g).abs().max() < 1e-12);

        let h = fixtures::hyperbolic_chart([-1.0, 1.0], [1.0, 3.0], 33, DerivativeMode::fd());
        let step = 2.0 / 32.0;
        for smp in h.ricci_samples().unwrap() {
            // one-sided stencils near the box edge are only first-order accurate
            let edge = smp.point[0].abs() > 1.0 - 2.5 * step
                || smp.point[1] < 1.0 + 2.5 * step
                || smp.point[1] > 3.0 - 2.5 * step;
            let tol = if edge { 0.15 } else { 2e-2 };
            assert!((smp.min_eigenvalue + 1.0).abs() < tol, "{:?} {}", smp.point, smp.min_eigenvalue);
            assert!((smp.max_eigenvalue + 1.0).abs() < tol, "{:?} {}", smp.point, smp.max_eigenvalue);
        }
        let model = ManifoldModel::single("H2", h, 1.0);
        assert!(model.ricci_warnings().unwrap().is_empty());
        let strict = ManifoldModel { ricci_lower_bound: 0.0, ..model };
        assert!(!strict.ricci_warnings().unwrap().is_empty());
    }

    #[test]
    fn equator_is_isometric() {
        let s = fixtures::sphere_chart(1.0, [0.5, 2.6], [-1.0, 1.0], 17, DerivativeMode::Analytic);
        let smp = s.metric_at(&[FRAC_PI_2, 0.0]).unwrap();
        assert!((smp.g - DMatrix::identity(2, 2)).abs().max() < 1e-15);
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let s = fixtures::sphere_chart(1.0, [0.5, 2.6], [-1.0, 1.0], 17, DerivativeMode::Analytic);
        let cf = s.christoffel().unwrap();
        for idx in [0, 40, 100, s.bounds.len() - 1] {
            let x = s.bounds.point(idx);
            let v = cf.interpolate(&x).unwrap();
            for (a, b) in v.iter().zip(cf.at_node(idx)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
