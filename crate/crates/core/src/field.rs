//! Scalar fields on chart coordinates and their derivative oracles.

use std::sync::Arc;

use crate::expr::Expr;
use crate::grid::CoordinateBox;
use crate::Error;

/// Value, gradient and (row-major) Hessian of a scalar field at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl Jet {
    pub fn zero(dim: usize) -> Self {
        Jet { value: 0.0, gradient: vec![0.0; dim], hessian: vec![0.0; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn second(&self, i: usize, j: usize) -> f64 {
        self.hessian[i * self.dim() + j]
    }
}

pub trait ScalarField: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// Exact derivatives, when the field can supply them.
    fn jet(&self, _x: &[f64]) -> Option<Jet> {
        None
    }

    /// `Some(c)` when the field is known to be the constant `c`.
    fn constant_value(&self) -> Option<f64> {
        None
    }

    fn describe(&self) -> String {
        "<closure>".to_string()
    }

    fn as_expr(&self) -> Option<&Expr> {
        None
    }
}

pub type Field = Arc<dyn ScalarField>;

impl std::fmt::Debug for dyn ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.describe())
    }
}

impl ScalarField for Expr {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    fn jet(&self, x: &[f64]) -> Option<Jet> {
        Some(Expr::jet(self, x))
    }

    fn constant_value(&self) -> Option<f64> {
        Expr::constant_value(self)
    }

    fn describe(&self) -> String {
        self.to_string()
    }

    fn as_expr(&self) -> Option<&Expr> {
        Some(self)
    }
}

struct Constant(f64);

impl ScalarField for Constant {
    fn value(&self, _x: &[f64]) -> f64 {
        self.0
    }

    fn jet(&self, x: &[f64]) -> Option<Jet> {
        let mut j = Jet::zero(x.len());
        j.value = self.0;
        Some(j)
    }

    fn constant_value(&self) -> Option<f64> {
        Some(self.0)
    }

    fn describe(&self) -> String {
        format!("{}", self.0)
    }
}

struct Closure<F>(F);

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ScalarField for Closure<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

pub fn constant(c: f64) -> Field {
    Arc::new(Constant(c))
}

/// A field backed by a plain function; it has no analytic jet.
pub fn from_fn(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Field {
    Arc::new(Closure(f))
}

/// Parses an expression over `vars` into a field.
pub fn expr(text: &str, vars: &[&str]) -> Result<Field, Error> {
    Ok(Arc::new(Expr::parse(text, vars)?))
}

/// `x ↦ f(s·x)`. Expression fields stay expressions, so their jets remain
/// exact.
pub fn rescaled(f: &Field, s: f64) -> Field {
    if let Some(c) = f.constant_value() {
        return constant(c);
    }
    match f.as_expr() {
        Some(e) => Arc::new(e.rescaled(s)),
        None => {
            let f = f.clone();
            from_fn(move |x| {
                let y: Vec<f64> = x.iter().map(|v| s * v).collect();
                f.value(&y)
            })
        }
    }
}

/// One-dimensional finite-difference stencil: `f'(x) ≈ Σ w_k f(x + o_k h) / h^d`.
#[derive(Clone, Debug)]
struct Stencil {
    offsets: &'static [i32],
    weights: &'static [f64],
}

const D1_CENTRAL: Stencil = Stencil { offsets: &[-1, 1], weights: &[-0.5, 0.5] };
const D1_FORWARD: Stencil = Stencil { offsets: &[0, 1, 2], weights: &[-1.5, 2.0, -0.5] };
const D1_BACKWARD: Stencil = Stencil { offsets: &[0, -1, -2], weights: &[1.5, -2.0, 0.5] };
const D2_CENTRAL: Stencil = Stencil { offsets: &[-1, 0, 1], weights: &[1.0, -2.0, 1.0] };
const D2_FORWARD: Stencil = Stencil { offsets: &[0, 1, 2, 3], weights: &[2.0, -5.0, 4.0, -1.0] };
const D2_BACKWARD: Stencil = Stencil { offsets: &[0, -1, -2, -3], weights: &[2.0, -5.0, 4.0, -1.0] };
const D2_FORWARD_LOW: Stencil = Stencil { offsets: &[0, 1, 2], weights: &[1.0, -2.0, 1.0] };
const D2_BACKWARD_LOW: Stencil = Stencil { offsets: &[0, -1, -2], weights: &[1.0, -2.0, 1.0] };

/// Chooses stencils along one axis: central when both neighbours are inside
/// the box, one-sided otherwise.
fn stencils(x: f64, h: f64, lo: f64, hi: f64) -> Option<(Stencil, Stencil)> {
    let slack = 1e-9 * h;
    let fits = |k: i32| {
        let y = x + k as f64 * h;
        y >= lo - slack && y <= hi + slack
    };
    if fits(-1) && fits(1) {
        Some((D1_CENTRAL, D2_CENTRAL))
    } else if fits(2) {
        Some((D1_FORWARD, if fits(3) { D2_FORWARD } else { D2_FORWARD_LOW }))
    } else if fits(-2) {
        Some((D1_BACKWARD, if fits(-3) { D2_BACKWARD } else { D2_BACKWARD_LOW }))
    } else {
        None
    }
}

/// Second-order finite-difference jet of `f` at `x` with per-axis steps,
/// never sampling outside `bounds`.
pub fn fd_jet(f: &dyn ScalarField, x: &[f64], steps: &[f64], bounds: &CoordinateBox) -> Result<Jet, Error> {
    let m = x.len();
    let mut chosen = Vec::with_capacity(m);
    for k in 0..m {
        let (lo, hi) = (bounds.lower[k], bounds.upper[k]);
        match stencils(x[k], steps[k], lo, hi) {
            Some(s) => chosen.push(s),
            None => {
                return Err(Error::ShrinkDomain {
                    point: x.to_vec(),
                    axis: k,
                    margin: 2.0 * steps[k],
                })
            }
        }
    }
    let mut y = x.to_vec();
    let value = f.value(x);
    let mut jet = Jet::zero(m);
    jet.value = value;
    for k in 0..m {
        let (d1, d2) = &chosen[k];
        let h = steps[k];
        let mut g = 0.0;
        for (o, w) in d1.offsets.iter().zip(d1.weights) {
            y[k] = x[k] + *o as f64 * h;
            g += w * f.value(&y);
        }
        let mut s = 0.0;
        for (o, w) in d2.offsets.iter().zip(d2.weights) {
            y[k] = x[k] + *o as f64 * h;
            s += w * if *o == 0 { value } else { f.value(&y) };
        }
        y[k] = x[k];
        jet.gradient[k] = g / h;
        jet.hessian[k * m + k] = s / (h * h);
    }
    for k in 0..m {
        for l in (k + 1)..m {
            let (dk, dl) = (&chosen[k].0, &chosen[l].0);
            let mut s = 0.0;
            for (ok, wk) in dk.offsets.iter().zip(dk.weights) {
                for (ol, wl) in dl.offsets.iter().zip(dl.weights) {
                    y[k] = x[k] + *ok as f64 * steps[k];
                    y[l] = x[l] + *ol as f64 * steps[l];
                    s += wk * wl * f.value(&y);
                }
            }
            y[k] = x[k];
            y[l] = x[l];
            let v = s / (steps[k] * steps[l]);
            jet.hessian[k * m + l] = v;
            jet.hessian[l * m + k] = v;
        }
    }
    Ok(jet)
}

/// Finite-difference gradient only (cheaper than a full jet).
pub fn fd_gradient(f: &dyn ScalarField, x: &[f64], steps: &[f64], bounds: &CoordinateBox) -> Result<Vec<f64>, Error> {
    let m = x.len();
    let mut y = x.to_vec();
    let mut grad = vec![0.0; m];
    let mut f0 = None;
    for k in 0..m {
        let (d1, _) = stencils(x[k], steps[k], bounds.lower[k], bounds.upper[k]).ok_or_else(|| {
            Error::ShrinkDomain { point: x.to_vec(), axis: k, margin: 2.0 * steps[k] }
        })?;
        let mut g = 0.0;
        for (o, w) in d1.offsets.iter().zip(d1.weights) {
            let v = if *o == 0 {
                *f0.get_or_insert_with(|| f.value(x))
            } else {
                y[k] = x[k] + *o as f64 * steps[k];
                f.value(&y)
            };
            g += w * v;
        }
        y[k] = x[k];
        grad[k] = g / steps[k];
    }
    Ok(grad)
}

/// Finite-difference derivative of a vector-valued function along each axis,
/// `out[k][c] = ∂_k f_c(x)`.
pub fn fd_partials<F>(f: F, x: &[f64], steps: &[f64], bounds: &CoordinateBox) -> Result<Vec<Vec<f64>>, Error>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, Error>,
{
    let m = x.len();
    let mut y = x.to_vec();
    let mut out = Vec::with_capacity(m);
    let mut f0: Option<Vec<f64>> = None;
    for k in 0..m {
        let (d1, _) = stencils(x[k], steps[k], bounds.lower[k], bounds.upper[k]).ok_or_else(|| {
            Error::ShrinkDomain { point: x.to_vec(), axis: k, margin: 2.0 * steps[k] }
        })?;
        let mut acc: Vec<f64> = Vec::new();
        for (o, w) in d1.offsets.iter().zip(d1.weights) {
            let v = if *o == 0 {
                if f0.is_none() {
                    f0 = Some(f(x)?);
                }
                f0.clone().unwrap()
            } else {
                y[k] = x[k] + *o as f64 * steps[k];
                f(&y)?
            };
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            for (a, b) in acc.iter_mut().zip(&v) {
                *a += w * b;
            }
        }
        y[k] = x[k];
        for a in acc.iter_mut() {
            *a /= steps[k];
        }
        out.push(acc);
    }
    Ok(out)
}
