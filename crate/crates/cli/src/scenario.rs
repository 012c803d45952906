//! Scenario files: a source and a target manifold, a map between them and a
//! run configuration, in one TOML document.
//!
//! Numbers may be written as TOML numbers or as constant expressions
//! (`"pi/2 - 0.4"`); radii and Lipschitz bounds also accept the sentinel
//! `"inf"`. Metric entries and map components are expressions in the
//! chart coordinates.
//!
//! Loading either yields a fully validated [`Scenario`] or every problem
//! found, each tagged with file, line and the violated invariant.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::ValueEnum;
use cz_core::expr::MAX_JET_VARS;
use cz_core::{CoordinateBox, DerivativeMode, Error as CoreError, Expr, Extended, Field, ManifoldModel, MapModel, MetricChart};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Mode {
    Lemma,
    Ball,
    Global,
    Intro,
    #[value(name = "corollaryA")]
    CorollaryA,
    Search,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Lemma => "lemma",
            Mode::Ball => "ball",
            Mode::Global => "global",
            Mode::Intro => "intro",
            Mode::CorollaryA => "corollaryA",
            Mode::Search => "search",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub file: PathBuf,
    pub line: usize,
    /// Name of the violated invariant, e.g. `SymmetryViolation`.
    pub invariant: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.file.display(), self.line, self.invariant, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}", render(.0))]
    Invalid(Vec<Issue>),
}

fn render(issues: &[Issue]) -> String {
    let lines: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
    lines.join("\n")
}

impl ScenarioError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            ScenarioError::Invalid(v) => v,
            ScenarioError::Io { .. } => &[],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    /// Relative slack on the declared Lipschitz bound.
    pub lipschitz: f64,
    /// Largest accepted isometry defect in the Euclidean-target modes.
    pub isometry: f64,
    pub trace: f64,
    pub scaling: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { lipschitz: 1e-2, isometry: 1e-8, trace: 1e-10, scaling: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub modes: Vec<Mode>,
    pub p: Vec<f64>,
    /// Source grid nodes per axis, one run per level.
    pub ladder: Vec<usize>,
    pub seed: u64,
    pub r_max: Option<f64>,
    pub out: Option<PathBuf>,
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, Default)]
pub struct BallConfig {
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub r: Option<f64>,
    pub big_r: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LemmaConfig {
    pub coefficients: Vec<Vec<Field>>,
    pub u: Field,
    pub s: f64,
    pub lambda: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub family: String,
    pub restarts: Option<usize>,
    pub max_contractions: Option<usize>,
}

pub const FAMILIES: [&str; 3] = ["affine", "sine", "graph"];

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub path: PathBuf,
    pub source: ManifoldModel,
    pub target: ManifoldModel,
    pub map: MapModel,
    /// The target point `o`.
    pub basepoint: Vec<f64>,
    pub run: RunConfig,
    pub ball: BallConfig,
    pub lemma: Option<LemmaConfig>,
    pub search: Option<SearchConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Scalar {
    Num(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawMetric {
    Named(String),
    Matrix(Vec<Vec<Scalar>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    source: Spanned<RawManifold>,
    target: Spanned<RawManifold>,
    map: Spanned<RawMap>,
    run: Option<Spanned<RawRun>>,
    ball: Option<Spanned<RawBall>>,
    lemma: Option<Spanned<RawLemma>>,
    search: Option<Spanned<RawSearch>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifold {
    name: Option<String>,
    dimension: Option<Spanned<usize>>,
    coordinates: Spanned<Vec<String>>,
    lower: Spanned<Vec<Scalar>>,
    upper: Spanned<Vec<Scalar>>,
    resolution: Spanned<usize>,
    metric: Spanned<RawMetric>,
    derivatives: Option<Spanned<String>>,
    ricci_lower_bound: Option<Spanned<f64>>,
    base_points: Option<Spanned<Vec<Vec<Scalar>>>>,
    harmonic_radius: Option<Spanned<Scalar>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    name: Option<String>,
    components: Spanned<Vec<String>>,
    lipschitz: Spanned<Scalar>,
    basepoint: Option<Spanned<Vec<Scalar>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    modes: Option<Spanned<Vec<String>>>,
    p: Option<Spanned<Vec<f64>>>,
    ladder: Option<Spanned<Vec<i64>>>,
    seed: Option<u64>,
    r_max: Option<Spanned<f64>>,
    out: Option<String>,
    tolerances: Option<RawTolerances>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    lipschitz: Option<f64>,
    isometry: Option<f64>,
    trace: Option<f64>,
    scaling: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBall {
    x: Option<Spanned<Vec<Scalar>>>,
    y: Option<Spanned<Vec<Scalar>>>,
    r: Option<Spanned<f64>>,
    big_r: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLemma {
    coefficients: Option<Spanned<Vec<Vec<Scalar>>>>,
    u: Option<Spanned<String>>,
    s: Option<Spanned<f64>>,
    lambda: Option<f64>,
    alpha: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    family: Spanned<String>,
    restarts: Option<usize>,
    max_contractions: Option<usize>,
}

/// Parses an expression over the given variables.
pub fn parse_expression(text: &str, vars: &[&str]) -> Result<Expr, cz_core::ExprError> {
    Expr::parse(text, vars)
}

struct Ctx<'a> {
    file: &'a Path,
    text: &'a str,
    issues: Vec<Issue>,
}

impl Ctx<'_> {
    fn line(&self, span: &Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].matches('\n').count() + 1
    }

    fn push(&mut self, span: &Range<usize>, invariant: &str, message: impl Into<String>) {
        let line = self.line(span);
        self.issues.push(Issue {
            file: self.file.to_path_buf(),
            line,
            invariant: invariant.to_string(),
            message: message.into(),
        });
    }

    fn core(&mut self, span: &Range<usize>, err: &CoreError) {
        let invariant = match err {
            CoreError::SymmetryViolation { .. } => "SymmetryViolation",
            CoreError::DegenerateMetric { .. } => "PositiveDefinite",
            CoreError::TargetEscape { .. } => "Containment",
            CoreError::OutsideChart { .. } => "Containment",
            CoreError::InvalidBox(_) => "CoordinateBox",
            CoreError::DimensionMismatch { .. } => "Dimension",
            CoreError::Expression(_) => "Expression",
            _ => "Validation",
        };
        self.push(span, invariant, err.to_string());
    }

    /// A constant, possibly `inf`.
    fn extended(&mut self, s: &Spanned<Scalar>, what: &str) -> Option<Extended> {
        match s.get_ref() {
            Scalar::Text(t) if is_inf(t) => Some(Extended::Infinite),
            _ => {
                let v = self.number(s.get_ref(), s.span(), what)?;
                if v > 0.0 {
                    Some(Extended::Finite(v))
                } else {
                    self.push(&s.span(), "Positivity", format!("{what} must be positive or \"inf\", got {v}"));
                    None
                }
            }
        }
    }

    fn number(&mut self, s: &Scalar, span: Range<usize>, what: &str) -> Option<f64> {
        let v = match s {
            Scalar::Num(v) => *v,
            Scalar::Text(t) => match Expr::parse(t, &[]).and_then(|e| e.try_eval(&[])) {
                Ok(v) => v,
                Err(e) => {
                    self.push(&span, "Expression", format!("{what}: '{t}' at {e}"));
                    return None;
                }
            },
        };
        if !v.is_finite() {
            self.push(&span, "Finite", format!("{what} must be finite"));
            return None;
        }
        Some(v)
    }

    fn numbers(&mut self, s: &Spanned<Vec<Scalar>>, what: &str) -> Option<Vec<f64>> {
        let span = s.span();
        let vals: Vec<Option<f64>> = s.get_ref().iter().map(|v| self.number(v, span.clone(), what)).collect();
        vals.into_iter().collect()
    }

    /// Parses `text` in `vars` and checks that it evaluates to a finite value
    /// at every node of `grid`.
    fn field(&mut self, span: &Range<usize>, what: &str, text: &str, vars: &[&str], grid: Option<&CoordinateBox>) -> Option<Field> {
        let expr = match Expr::parse(text, vars) {
            Ok(e) => e,
            Err(e) => {
                self.push(span, "Expression", format!("{what} '{text}': {e}"));
                return None;
            }
        };
        if let Some(grid) = grid {
            for x in grid.points() {
                if let Err(e) = expr.try_eval(&x) {
                    self.push(span, "Expression", format!("{what} '{text}': {e}"));
                    return None;
                }
            }
        }
        Some(Arc::new(expr))
    }

    fn scalar_field(&mut self, span: &Range<usize>, what: &str, s: &Scalar, vars: &[&str], grid: Option<&CoordinateBox>) -> Option<Field> {
        match s {
            Scalar::Num(v) => Some(cz_core::field::constant(*v)),
            Scalar::Text(t) => self.field(span, what, t, vars, grid),
        }
    }
}

fn is_inf(t: &str) -> bool {
    matches!(t.trim(), "inf" | "<inf>")
}

fn parse_mode(name: &str) -> Option<Mode> {
    Mode::from_str(name, false).ok()
}

struct Built {
    model: ManifoldModel,
    coords: Vec<String>,
}

fn manifold(ctx: &mut Ctx, key: &str, raw: &Spanned<RawManifold>) -> Option<Built> {
    let raw = raw.get_ref();
    let before = ctx.issues.len();
    let coords = raw.coordinates.get_ref().clone();
    let m = coords.len();
    if m == 0 {
        ctx.push(&raw.coordinates.span(), "Dimension", format!("[{key}] needs at least one coordinate"));
        return None;
    }
    for (k, c) in coords.iter().enumerate() {
        if coords[..k].contains(c) {
            ctx.push(&raw.coordinates.span(), "Dimension", format!("coordinate '{c}' is declared twice"));
        }
    }
    if let Some(d) = &raw.dimension {
        if *d.get_ref() != m {
            ctx.push(&d.span(), "Dimension", format!("dimension {} but {m} coordinates", d.get_ref()));
        }
    }
    let mode = match raw.derivatives.as_ref().map(|d| (d.get_ref().as_str(), d.span())) {
        None | Some(("analytic", _)) => DerivativeMode::Analytic,
        Some(("finite-difference" | "fd", _)) => DerivativeMode::fd(),
        Some((other, span)) => {
            ctx.push(&span, "DerivativeMode", format!("unknown derivative mode '{other}' (analytic, finite-difference)"));
            DerivativeMode::Analytic
        }
    };
    if matches!(mode, DerivativeMode::Analytic) && m > MAX_JET_VARS {
        ctx.push(&raw.coordinates.span(), "Dimension", format!("analytic derivatives support at most {MAX_JET_VARS} coordinates"));
    }
    let lower = ctx.numbers(&raw.lower, "lower bound");
    let upper = ctx.numbers(&raw.upper, "upper bound");
    let res = *raw.resolution.get_ref();
    if res < 3 {
        ctx.push(&raw.resolution.span(), "Resolution", format!("resolution must be at least 3, got {res}"));
    }
    let (lower, upper) = (lower?, upper?);
    for (what, v, span) in [("lower", &lower, raw.lower.span()), ("upper", &upper, raw.upper.span())] {
        if v.len() != m {
            ctx.push(&span, "Dimension", format!("{what} has {} entries for {m} coordinates", v.len()));
        }
    }
    if ctx.issues.len() > before {
        return None;
    }
    let bounds = match CoordinateBox::new(lower, upper, vec![res; m]) {
        Ok(b) => b,
        Err(e) => {
            ctx.core(&raw.lower.span(), &e);
            return None;
        }
    };
    let vars: Vec<&str> = coords.iter().map(|s| s.as_str()).collect();
    let name = raw.name.clone().unwrap_or_else(|| key.to_string());
    let metric_span = raw.metric.span();
    let chart = match raw.metric.get_ref() {
        RawMetric::Named(n) if n == "euclidean" => MetricChart::euclidean(name.clone(), bounds.clone()).map(|c| c.with_mode(mode)),
        RawMetric::Named(n) => {
            ctx.push(&metric_span, "Metric", format!("unknown metric '{n}' (give a matrix or \"euclidean\")"));
            return None;
        }
        RawMetric::Matrix(rows) => {
            if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                ctx.push(&metric_span, "Dimension", format!("metric must be a {m}x{m} matrix"));
                return None;
            }
            let mut matrix = Vec::with_capacity(m);
            for (i, row) in rows.iter().enumerate() {
                let mut out = Vec::with_capacity(m);
                for (j, s) in row.iter().enumerate() {
                    out.push(ctx.scalar_field(&metric_span, &format!("g_{i}{j}"), s, &vars, Some(&bounds)));
                }
                matrix.push(out);
            }
            let matrix: Option<Vec<Vec<Field>>> = matrix.into_iter().map(|r| r.into_iter().collect()).collect();
            MetricChart::from_matrix(name.clone(), bounds.clone(), matrix?, mode)
        }
    };
    let chart = match chart {
        Ok(c) => c,
        Err(e) => {
            ctx.core(&metric_span, &e);
            return None;
        }
    };
    let ricci = match &raw.ricci_lower_bound {
        Some(a) if !(*a.get_ref() >= 0.0) => {
            ctx.push(&a.span(), "RicciParameter", format!("Ricci lower-bound parameter must be nonnegative, got {}", a.get_ref()));
            0.0
        }
        Some(a) => *a.get_ref(),
        None => 0.0,
    };
    let mut model = ManifoldModel::single(name, chart, ricci);
    if let Err(e) = model.validate() {
        ctx.core(&metric_span, &e);
    }
    if let Some(pts) = &raw.base_points {
        let span = pts.span();
        let mut out = Vec::new();
        for p in pts.get_ref() {
            let vals: Option<Vec<f64>> = p.iter().map(|v| ctx.number(v, span.clone(), "base point")).collect();
            let Some(vals) = vals else { continue };
            if vals.len() != m {
                ctx.push(&span, "Dimension", format!("base point {vals:?} needs {m} coordinates"));
            } else if !bounds.contains(&vals) {
                ctx.push(&span, "Containment", format!("base point {vals:?} lies outside the chart box"));
            } else {
                out.push(vals);
            }
        }
        model = model.with_base_points(out);
    }
    if let Some(h) = &raw.harmonic_radius {
        if let Some(r) = ctx.extended(h, "harmonic radius") {
            model = model.with_harmonic_radius(r);
        }
    }
    (ctx.issues.len() == before).then_some(Built { model, coords })
}

fn point_in(ctx: &mut Ctx, raw: &Option<Spanned<Vec<Scalar>>>, what: &str, bounds: &CoordinateBox) -> Option<Vec<f64>> {
    let s = raw.as_ref()?;
    let v = ctx.numbers(s, what)?;
    if v.len() != bounds.dim() {
        ctx.push(&s.span(), "Dimension", format!("{what} needs {} coordinates", bounds.dim()));
        return None;
    }
    if !bounds.contains(&v) {
        ctx.push(&s.span(), "Containment", format!("{what} {v:?} lies outside the chart box"));
        return None;
    }
    Some(v)
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    parse_scenario(path, &text)
}

/// Validates scenario `text`; `path` is only used to locate errors.
pub fn parse_scenario(path: &Path, text: &str) -> Result<Scenario, ScenarioError> {
    let mut ctx = Ctx { file: path, text, issues: Vec::new() };
    let raw: RawScenario = match toml::from_str(text) {
        Ok(r) => r,
        Err(e) => {
            let span = e.span().unwrap_or(0..0);
            ctx.push(&span, "Syntax", e.message().to_string());
            return Err(ScenarioError::Invalid(ctx.issues));
        }
    };
    let source = manifold(&mut ctx, "source", &raw.source);
    let target = manifold(&mut ctx, "target", &raw.target);

    let map_raw = raw.map.get_ref();
    let lipschitz = ctx.extended(&map_raw.lipschitz, "Lipschitz bound");
    let mut map = None;
    let mut basepoint = None;
    if let (Some(src), Some(tgt)) = (&source, &target) {
        let vars: Vec<&str> = src.coords.iter().map(|s| s.as_str()).collect();
        let comps_span = map_raw.components.span();
        let n = tgt.model.dimension;
        if map_raw.components.get_ref().len() != n {
            ctx.push(
                &comps_span,
                "Dimension",
                format!("map has {} components for a {n}-dimensional target", map_raw.components.get_ref().len()),
            );
        } else {
            let grid = &src.model.chart().bounds;
            let comps: Vec<Option<Field>> = map_raw
                .components
                .get_ref()
                .iter()
                .enumerate()
                .map(|(a, t)| ctx.field(&comps_span, &format!("component {a}"), t, &vars, Some(grid)))
                .collect();
            let comps: Option<Vec<Field>> = comps.into_iter().collect();
            if let (Some(comps), Some(lip)) = (comps, lipschitz) {
                let name = map_raw.name.clone().unwrap_or_else(|| "map".into());
                match MapModel::new(name, src.model.chart().clone(), tgt.model.chart().clone(), comps, lip) {
                    Ok(m) => match m.check_containment() {
                        Ok(()) => map = Some(m),
                        Err(e) => ctx.core(&comps_span, &e),
                    },
                    Err(e) => ctx.core(&comps_span, &e),
                }
            }
        }
        let tb = &tgt.model.chart().bounds;
        basepoint = match &map_raw.basepoint {
            Some(_) => point_in(&mut ctx, &map_raw.basepoint, "map basepoint", tb),
            None => Some(tb.lower.iter().zip(&tb.upper).map(|(l, u)| 0.5 * (l + u)).collect()),
        };
    }

    let run = run_config(&mut ctx, raw.run.as_ref(), source.as_ref().map(|s| s.model.chart().bounds.resolution[0]));

    let mut ball = BallConfig::default();
    if let (Some(b), Some(src), Some(tgt)) = (&raw.ball, &source, &target) {
        let b = b.get_ref();
        ball.x = point_in(&mut ctx, &b.x, "ball center x", &src.model.chart().bounds);
        ball.y = point_in(&mut ctx, &b.y, "ball center y", &tgt.model.chart().bounds);
        for (slot, v, what) in [(&mut ball.r, &b.r, "ball radius r"), (&mut ball.big_r, &b.big_r, "target radius R")] {
            if let Some(v) = v {
                if *v.get_ref() > 0.0 && v.get_ref().is_finite() {
                    *slot = Some(*v.get_ref());
                } else {
                    ctx.push(&v.span(), "Positivity", format!("{what} must be positive"));
                }
            }
        }
    }

    let lemma = match (&raw.lemma, &source) {
        (Some(l), Some(src)) => lemma_config(&mut ctx, l, src),
        _ => None,
    };

    let search = raw.search.as_ref().and_then(|s| {
        let s = s.get_ref();
        let family = s.family.get_ref().clone();
        if !FAMILIES.contains(&family.as_str()) {
            ctx.push(&s.family.span(), "SearchFamily", format!("unknown family '{family}' (one of {})", FAMILIES.join(", ")));
            return None;
        }
        Some(SearchConfig { family, restarts: s.restarts, max_contractions: s.max_contractions })
    });
    if let (Some(r), None) = (&raw.run, &raw.search) {
        if run.modes.contains(&Mode::Search) {
            ctx.push(&r.span(), "SearchFamily", "search mode needs a [search] section naming a family");
        }
    }

    if !ctx.issues.is_empty() {
        return Err(ScenarioError::Invalid(ctx.issues));
    }
    let name = raw
        .name
        .clone()
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into()));
    Ok(Scenario {
        name,
        path: path.to_path_buf(),
        source: source.expect("validated").model,
        target: target.expect("validated").model,
        map: map.expect("validated"),
        basepoint: basepoint.expect("validated"),
        run,
        ball,
        lemma,
        search,
    })
}

fn run_config(ctx: &mut Ctx, raw: Option<&Spanned<RawRun>>, default_res: Option<usize>) -> RunConfig {
    let mut cfg = RunConfig {
        modes: vec![Mode::Global],
        p: vec![2.0],
        ladder: default_res.into_iter().collect(),
        seed: 7,
        r_max: None,
        out: None,
        tolerances: Tolerances::default(),
    };
    let Some(raw) = raw else { return cfg };
    let raw = raw.get_ref();
    if let Some(modes) = &raw.modes {
        let mut out = Vec::new();
        for name in modes.get_ref() {
            match parse_mode(name) {
                Some(m) => out.push(m),
                None => ctx.push(
                    &modes.span(),
                    "Mode",
                    format!("unknown mode '{name}' (lemma, ball, global, intro, corollaryA, search)"),
                ),
            }
        }
        if out.is_empty() {
            ctx.push(&modes.span(), "Mode", "at least one mode is required");
        }
        cfg.modes = out;
    }
    if let Some(p) = &raw.p {
        if let Err(msg) = check_exponents(p.get_ref()) {
            ctx.push(&p.span(), "Exponent", msg);
        }
        cfg.p = p.get_ref().clone();
    }
    if let Some(l) = &raw.ladder {
        let mut out = Vec::new();
        for &n in l.get_ref() {
            if n < 3 {
                ctx.push(&l.span(), "Resolution", format!("ladder levels must be at least 3, got {n}"));
            } else {
                out.push(n as usize);
            }
        }
        if l.get_ref().is_empty() {
            ctx.push(&l.span(), "Resolution", "ladder must not be empty");
        }
        cfg.ladder = out;
    }
    if let Some(s) = raw.seed {
        cfg.seed = s;
    }
    if let Some(r) = &raw.r_max {
        if *r.get_ref() > 0.0 {
            cfg.r_max = Some(*r.get_ref());
        } else {
            ctx.push(&r.span(), "Positivity", "r_max must be positive");
        }
    }
    cfg.out = raw.out.as_ref().map(PathBuf::from);
    if let Some(t) = &raw.tolerances {
        let d = &mut cfg.tolerances;
        d.lipschitz = t.lipschitz.unwrap_or(d.lipschitz);
        d.isometry = t.isometry.unwrap_or(d.isometry);
        d.trace = t.trace.unwrap_or(d.trace);
        d.scaling = t.scaling.unwrap_or(d.scaling);
    }
    cfg
}

pub fn check_exponents(p: &[f64]) -> Result<(), String> {
    if p.is_empty() {
        return Err("at least one exponent is required".into());
    }
    match p.iter().find(|v| !(**v > 1.0 && v.is_finite())) {
        Some(bad) => Err(format!("exponents must satisfy 1 < p < inf, got {bad}")),
        None => Ok(()),
    }
}

fn lemma_config(ctx: &mut Ctx, raw: &Spanned<RawLemma>, src: &Built) -> Option<LemmaConfig> {
    let span = raw.span();
    let raw = raw.get_ref();
    let vars: Vec<&str> = src.coords.iter().map(|s| s.as_str()).collect();
    let m = vars.len();
    let coefficients = match &raw.coefficients {
        None => (0..m)
            .map(|i| (0..m).map(|j| cz_core::field::constant(if i == j { 1.0 } else { 0.0 })).collect())
            .collect(),
        Some(c) => {
            let cs = c.span();
            if c.get_ref().len() != m || c.get_ref().iter().any(|r| r.len() != m) {
                ctx.push(&cs, "Dimension", format!("coefficients must be a {m}x{m} matrix"));
                return None;
            }
            let rows: Vec<Option<Vec<Field>>> = c
                .get_ref()
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let r: Vec<Option<Field>> = row
                        .iter()
                        .enumerate()
                        .map(|(j, s)| ctx.scalar_field(&cs, &format!("a^{i}{j}"), s, &vars, None))
                        .collect();
                    r.into_iter().collect()
                })
                .collect();
            rows.into_iter().collect::<Option<Vec<_>>>()?
        }
    };
    let u_text = raw.u.as_ref().map(|u| (u.get_ref().as_str(), u.span())).unwrap_or((vars[0], span.clone()));
    let u = ctx.field(&u_text.1, "u", u_text.0, &vars, None)?;
    let s = match &raw.s {
        Some(s) if !(*s.get_ref() > 0.0 && *s.get_ref() <= 1.0) => {
            ctx.push(&s.span(), "Scale", format!("s must lie in (0, 1], got {}", s.get_ref()));
            return None;
        }
        Some(s) => *s.get_ref(),
        None => 0.5,
    };
    Some(LemmaConfig { coefficients, u, s, lambda: raw.lambda.unwrap_or(1.0), alpha: raw.alpha.unwrap_or(0.5) })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = r#"
[source]
coordinates = ["x", "y"]
lower = [-1, -1]
upper = [1, 1]
resolution = 9
metric = "euclidean"

[target]
coordinates = ["a", "b"]
lower = [-2, -2]
upper = [2, 2]
resolution = 5
metric = [[1, 0], [0, 1]]

[map]
components = ["x", "y"]
lipschitz = 1
"#;

    fn load(text: &str) -> Result<Scenario, ScenarioError> {
        parse_scenario(Path::new("test.toml"), text)
    }

    #[test]
    fn expressions_evaluate() {
        let t = parse_expression("sin(t)^2", &["t"]).unwrap();
        assert!((t.eval(&[std::f64::consts::FRAC_PI_2]) - 1.0).abs() < 1e-15);
        assert_eq!(parse_expression("1/(y*y)", &["y"]).unwrap().eval(&[2.0]), 0.25);
        assert_eq!(parse_expression("x^2 - y^2", &["x", "y"]).unwrap().eval(&[1.0, 2.0]), -3.0);
    }

    #[test]
    fn minimal_scenario_loads_with_defaults() {
        let s = load(FLAT).unwrap();
        assert_eq!(s.run.modes, vec![Mode::Global]);
        assert_eq!(s.run.ladder, vec![9]);
        assert_eq!(s.basepoint, vec![0.0, 0.0]);
        assert!(s.target.chart().is_constant());
    }

    #[test]
    fn sentinels_and_constant_expressions() {
        let text = FLAT.replace("lipschitz = 1", "lipschitz = \"inf\"").replace("upper = [1, 1]", "upper = [\"pi/4\", 1]");
        let s = load(&text).unwrap();
        assert_eq!(s.map.lipschitz, Extended::Infinite);
        assert_eq!(s.source.chart().bounds.upper[0], std::f64::consts::FRAC_PI_4);
    }

    #[test]
    fn asymmetric_metric_is_located() {
        let text = FLAT.replace("metric = [[1, 0], [0, 1]]", "metric = [[1, \"0.1*a\"], [0, 1]]");
        let err = load(&text).unwrap_err();
        let issues = err.issues();
        assert_eq!(issues.len(), 1, "{err}");
        assert_eq!(issues[0].invariant, "SymmetryViolation");
        assert_eq!(issues[0].line, 14);
    }

    #[test]
    fn every_problem_is_reported() {
        let text = FLAT
            .replace("components = [\"x\", \"y\"]", "components = [\"x\", \"yy\"]")
            .replace("resolution = 5", "resolution = 2");
        let err = load(&text).unwrap_err();
        let kinds: Vec<&str> = err.issues().iter().map(|i| i.invariant.as_str()).collect();
        assert_eq!(kinds, ["Resolution"], "{err}");
        let text = FLAT.replace("components = [\"x\", \"y\"]", "components = [\"x\", \"yy\"]").replace("lipschitz = 1", "lipschitz = -1");
        let err = load(&text).unwrap_err();
        let kinds: Vec<&str> = err.issues().iter().map(|i| i.invariant.as_str()).collect();
        assert_eq!(kinds, ["Positivity", "Expression"], "{err}");
        assert!(err.to_string().contains("did you mean"), "{err}");
    }

    #[test]
    fn escaping_maps_and_indefinite_metrics_fail() {
        let err = load(&FLAT.replace("components = [\"x\", \"y\"]", "components = [\"3*x\", \"y\"]")).unwrap_err();
        assert_eq!(err.issues()[0].invariant, "Containment");
        assert_eq!(err.issues()[0].line, 17);
        let err = load(&FLAT.replace("metric = [[1, 0], [0, 1]]", "metric = [[1, 0], [0, \"a\"]]")).unwrap_err();
        assert_eq!(err.issues()[0].invariant, "PositiveDefinite");
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let err = load(&FLAT.replace("resolution = 9", "resolution = ")).unwrap_err();
        assert_eq!(err.issues()[0].invariant, "Syntax");
        assert_eq!(err.issues()[0].line, 6);
        let err = load(&format!("{FLAT}\n[run]\nmodes = [\"global\", \"bogus\"]\np = [1.0]\n")).unwrap_err();
        let kinds: Vec<&str> = err.issues().iter().map(|i| i.invariant.as_str()).collect();
        assert_eq!(kinds, ["Mode", "Exponent"]);
    }
}
