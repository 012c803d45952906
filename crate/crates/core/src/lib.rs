//! Numerical engine for Lᵖ Calderón–Zygmund inequalities of maps between
//! Riemannian manifolds given on coordinate charts.
//!
//! The layers, bottom up:
//! - [`expr`], [`field`], [`grid`]: expressions, scalar fields with derivative
//!   oracles, and uniform grids on coordinate boxes;
//! - [`metric`], [`geodesic`]: metrics, Christoffel symbols, Ricci samples,
//!   geodesic distance and metric balls;
//! - [`map`]: differentials, generalized Hessians and Laplacians of maps,
//!   pointwise norms and immersion data;
//! - [`lp`]: volume-weighted Lᵖ norms and Hölder seminorms;
//! - [`harmonic`]: harmonic coordinates and harmonic radius estimates;
//! - [`engine`]: the scaled elliptic lemma, ball estimates, the global
//!   pipeline (radius, Ω-splitting, covering, summation), Euclidean-target
//!   corollaries and the extremal-ratio search.
//!
//! [`fixtures`] collects the analytically specified manifolds and maps used
//! by the tests and the CLI.

pub mod engine;
pub mod expr;
pub mod field;
pub mod fixtures;
pub mod geodesic;
pub mod grid;
pub mod harmonic;
pub mod lp;
pub mod map;
pub mod metric;

pub use engine::Extended;
pub use expr::{Expr, ExprError};
pub use field::{Field, Jet, ScalarField};
pub use grid::CoordinateBox;
pub use map::{JetField, MapModel};
pub use metric::{DerivativeMode, ManifoldModel, MetricChart};

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid coordinate box: {0}")]
    InvalidBox(String),
    #[error("point {point:?} lies outside chart '{chart}'")]
    OutsideChart { chart: String, point: Vec<f64> },
    #[error("metric is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    DegenerateMetric { point: Vec<f64>, min_eigenvalue: f64 },
    #[error("finite-difference stencil leaves the box on axis {axis} at {point:?}; shrink the domain by at least {margin:e}")]
    ShrinkDomain { point: Vec<f64>, axis: usize, margin: f64 },
    #[error("metric components g_{i}{j} and g_{j}{i} differ at {point:?}")]
    SymmetryViolation { i: usize, j: usize, point: Vec<f64> },
    #[error("no analytic derivative available for {0}")]
    NoAnalyticOracle(String),
    #[error("{to:?} is unreachable from {from:?} on the chart grid")]
    Unreachable { from: Vec<f64>, to: Vec<f64> },
    #[error("map sends {point:?} to {image:?}, outside the target chart")]
    TargetEscape { point: Vec<f64>, image: Vec<f64> },
    #[error("differential is rank deficient at {point:?} (smallest singular value {singular_value:e})")]
    NotImmersion { point: Vec<f64>, singular_value: f64 },
    #[error("Lipschitz bound {bound} violated: ratio {ratio} between {x:?} and {y:?}")]
    LipschitzViolation { bound: f64, ratio: f64, x: Vec<f64>, y: Vec<f64> },
    #[error("iterative solver did not converge (last residuals {history:?})")]
    SolverDiverged { history: Vec<f64> },
    #[error("harmonic coordinates degenerate at {point:?} (normalized Jacobian {jacobian:e})")]
    NotDiffeomorphic { point: Vec<f64>, jacobian: f64 },
    #[error("at radius {radius}: {source}")]
    AtRadius { radius: f64, source: Box<Error> },
    #[error("at center {center:?}: {source}")]
    AtCenter { center: Vec<f64>, source: Box<Error> },
    #[error("exponent p = {0} is not supported (need 1 < p < inf)")]
    UnsupportedExponent(f64),
    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("harmonic radius certificate required: {0}")]
    CertificateRequired(String),
    #[error("radius is degenerate: infinite Lipschitz bound with finite target radius")]
    DegenerateRadius,
    #[error("radius {r_hat:e} is not above the metric grid step {step:e}")]
    ResolutionTooCoarse { r_hat: f64, step: f64 },
    #[error("no feasible candidate in the search family")]
    EmptyFeasibleSet,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("expression error: {0}")]
    Expression(#[from] ExprError),
    #[error("{0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn at_radius(self, radius: f64) -> Error {
        Error::AtRadius { radius, source: Box::new(self) }
    }

    pub fn at_center(self, center: &[f64]) -> Error {
        Error::AtCenter { center: center.to_vec(), source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
