//! Runs a scenario over its (mode, p, grid level) product and turns every
//! outcome into a [`Record`].

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use cz_core::engine::ball::{verify_ball_estimate, BallInputs};
use cz_core::engine::corollary::{verify_euclidean_corollaries, CorollaryMode};
use cz_core::engine::global::{fitting_radius, model_radius, verify_global_estimate, GlobalOptions, GlobalProblem};
use cz_core::engine::scaling::{verify_interior_estimate, verify_scaling_identities, EllipticOperatorSpec};
use cz_core::engine::search::{extremal_ratio_search, MapFamily, SearchOptions};
use cz_core::harmonic::{HarmonicOptions, RadiusEstimate};
use cz_core::{fixtures, Extended, ManifoldModel};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::scenario::{Mode, RunConfig, Scenario, SearchConfig};

/// Attached to every record: chart models are bounded, so the estimates are
/// only checked on balls inside the chart boxes.
pub const CAVEAT: &str = "bounded chart models: estimates are checked on interior balls only";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    /// The engine returned an error.
    Error,
    /// The run finished but a hard invariant check failed.
    Violated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Terms {
    pub lhs_hess: f64,
    pub t_laplacian: f64,
    pub t_du: f64,
    pub t_du_2p_sq: f64,
    pub t_dist: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverStats {
    pub r_hat: f64,
    pub centers: usize,
    pub min_coverage: u32,
    pub multiplicity: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub scenario: String,
    pub mode: Mode,
    pub p: f64,
    /// Source grid nodes per axis.
    pub resolution: usize,
    pub status: Status,
    pub error: Option<String>,
    pub violations: Vec<String>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub ratio: Option<f64>,
    pub terms: Option<Terms>,
    pub cover: Option<CoverStats>,
    /// Harmonic radius estimates with their per-radius certificates.
    pub certificates: Value,
    pub detail: Value,
    pub caveat: String,
    pub elapsed_ms: f64,
}

#[derive(Default)]
struct Outcome {
    lhs: Option<f64>,
    rhs: Option<f64>,
    ratio: Option<f64>,
    terms: Option<Terms>,
    cover: Option<CoverStats>,
    certificates: Vec<RadiusEstimate>,
    detail: Value,
    violations: Vec<String>,
}

#[derive(Clone)]
struct Radii {
    source: Extended,
    target: Extended,
    estimates: Vec<RadiusEstimate>,
}

fn global_options(cfg: &RunConfig, p: f64) -> GlobalOptions {
    GlobalOptions {
        p,
        r_max: cfg.r_max,
        harmonic: HarmonicOptions { seed: cfg.seed, ..HarmonicOptions::default() },
        seed: cfg.seed,
        lipschitz_tol: cfg.tolerances.lipschitz,
    }
}

fn with_chart(model: &ManifoldModel, chart: Arc<cz_core::MetricChart>) -> ManifoldModel {
    let mut m = model.clone();
    m.atlas[0].chart = chart;
    m
}

/// The scenario with its source chart resampled at `n` nodes per axis.
pub fn level_problem(s: &Scenario, n: usize) -> GlobalProblem {
    let chart = Arc::new(s.source.chart().with_resolution(n));
    GlobalProblem {
        source: with_chart(&s.source, chart.clone()),
        target: s.target.clone(),
        map: s.map.with_source(chart),
        basepoint: s.basepoint.clone(),
    }
}

fn strip(mut v: Value, keys: &[&str]) -> Value {
    if let Value::Object(map) = &mut v {
        for k in keys {
            map.remove(*k);
        }
    }
    v
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

struct Runner<'a> {
    s: &'a Scenario,
    radii: HashMap<usize, Result<Radii, String>>,
}

impl Runner<'_> {
    /// Harmonic radii at one grid level, computed once and reused for every
    /// exponent and mode.
    fn radii(&mut self, n: usize) -> Result<Radii, String> {
        let s = self.s;
        self.radii
            .entry(n)
            .or_insert_with(|| {
                let problem = level_problem(s, n);
                let opts = global_options(&s.run, 2.0);
                let (source, mut estimates) = model_radius(&problem.source, &opts).map_err(|e| e.to_string())?;
                let (target, est_n) = model_radius(&problem.target, &opts).map_err(|e| e.to_string())?;
                estimates.extend(est_n);
                Ok(Radii { source, target, estimates })
            })
            .clone()
    }

    fn run(&mut self, mode: Mode, p: f64, n: usize) -> Result<Outcome, String> {
        let s = self.s;
        let cfg = &s.run;
        match mode {
            Mode::Global => {
                let radii = self.radii(n)?;
                let mut problem = level_problem(s, n);
                problem.source.harmonic_radius = Some(radii.source);
                problem.target.harmonic_radius = Some(radii.target);
                let rep = verify_global_estimate(&problem, &global_options(cfg, p)).map_err(|e| e.to_string())?;
                let mut violations = Vec::new();
                if !rep.cover.is_cover() {
                    violations.push("cover leaves grid nodes uncovered".to_string());
                }
                if rep.centers.containment_failures > 0 {
                    violations.push(format!("{} centers fail the image containment", rep.centers.containment_failures));
                }
                if rep.centers.comparison_failures > 0 {
                    violations.push(format!("{} centers fail the distance comparison", rep.centers.comparison_failures));
                }
                if !rep.summation.holds {
                    violations.push("multiplicity summation bound fails".to_string());
                }
                if rep.trace_identity_defect > cfg.tolerances.trace {
                    violations.push(format!("trace identity defect {:e}", rep.trace_identity_defect));
                }
                let t = rep.terms;
                Ok(Outcome {
                    lhs: Some(t.lhs_hess),
                    rhs: Some(t.rhs()),
                    ratio: Some(rep.ratio),
                    terms: Some(Terms {
                        lhs_hess: t.lhs_hess,
                        t_laplacian: t.t_laplacian,
                        t_du: t.t_du,
                        t_du_2p_sq: t.t_du_2p_sq,
                        t_dist: t.t_dist,
                    }),
                    cover: Some(CoverStats {
                        r_hat: rep.r_hat,
                        centers: rep.cover.centers.len(),
                        min_coverage: rep.cover.min_coverage,
                        multiplicity: rep.cover.multiplicity,
                    }),
                    certificates: radii.estimates,
                    detail: strip(to_value(&rep), &["terms", "cover", "radius_estimates", "ratio", "p"]),
                    violations,
                })
            }
            Mode::Ball => {
                let radii = self.radii(n)?;
                let problem = level_problem(s, n);
                let map = &problem.map;
                let src = &map.source;
                let x = match &s.ball.x {
                    Some(x) => x.clone(),
                    None => s.source.base_points.first().cloned().unwrap_or_else(|| {
                        src.bounds.lower.iter().zip(&src.bounds.upper).map(|(l, u)| 0.5 * (l + u)).collect()
                    }),
                };
                let y = match &s.ball.y {
                    Some(y) => y.clone(),
                    None => map.image(&x).map_err(|e| e.to_string())?,
                };
                let r = match s.ball.r {
                    Some(r) => r,
                    None => {
                        let limit = radii.source.min(Extended::Finite(1.0)).value() / 2.0;
                        limit.min(fitting_radius(src, &x).map_err(|e| e.to_string())? / 2.0)
                    }
                };
                let big_r = match (s.ball.big_r, radii.target, map.lipschitz) {
                    (Some(v), _, _) => v,
                    (None, Extended::Finite(r1n), _) => 0.99 * r1n,
                    (None, Extended::Infinite, Extended::Finite(l)) => 2.0 * l * r,
                    (None, Extended::Infinite, Extended::Infinite) => {
                        return Err("ball mode needs [ball] big_r when the Lipschitz bound is infinite".into())
                    }
                };
                let est = verify_ball_estimate(&BallInputs {
                    map,
                    x,
                    y,
                    r,
                    big_r,
                    p,
                    source_radius: Some(radii.source),
                    target_radius: Some(radii.target),
                })
                .map_err(|e| e.to_string())?;
                let t = est.terms;
                Ok(Outcome {
                    lhs: Some(t.lhs),
                    rhs: Some(t.rhs()),
                    ratio: Some(est.ratio),
                    terms: Some(Terms {
                        lhs_hess: t.lhs,
                        t_laplacian: t.t1,
                        t_du: t.t4,
                        t_du_2p_sq: t.t2,
                        t_dist: t.t3,
                    }),
                    certificates: radii.estimates,
                    detail: strip(to_value(&est), &["terms", "ratio", "p"]),
                    ..Outcome::default()
                })
            }
            Mode::Intro | Mode::CorollaryA => {
                let (cmode, r1m, r1n, certs) = if mode == Mode::Intro {
                    (CorollaryMode::Intro, Extended::Infinite, Extended::Infinite, Vec::new())
                } else {
                    let radii = self.radii(n)?;
                    (CorollaryMode::CorollaryA, radii.source, radii.target, radii.estimates)
                };
                let problem = level_problem(s, n);
                let rep = verify_euclidean_corollaries(&problem.map, p, cmode, r1m, r1n).map_err(|e| e.to_string())?;
                let mut violations = Vec::new();
                if rep.isometry_defect > cfg.tolerances.isometry {
                    violations.push(format!("isometry defect {:e} exceeds {:e}", rep.isometry_defect, cfg.tolerances.isometry));
                }
                Ok(Outcome {
                    lhs: Some(rep.ii_norm),
                    rhs: Some(rep.rhs),
                    ratio: Some(rep.ratio),
                    certificates: certs,
                    detail: strip(to_value(&rep), &["mode", "ratio", "rhs", "p"]),
                    violations,
                    ..Outcome::default()
                })
            }
            Mode::Lemma => {
                let lemma = s.lemma.clone();
                let m = s.source.dimension;
                let spec = match &lemma {
                    Some(l) => EllipticOperatorSpec {
                        s: l.s,
                        q: p,
                        coefficients: l.coefficients.clone(),
                        lambda: l.lambda,
                        alpha: l.alpha,
                        mode: s.source.chart().mode.clone(),
                        resolution: n,
                        seed: cfg.seed,
                    },
                    None => EllipticOperatorSpec {
                        mode: s.source.chart().mode.clone(),
                        resolution: n,
                        seed: cfg.seed,
                        ..EllipticOperatorSpec::laplacian(m, 0.5, p)
                    },
                };
                let u = match &lemma {
                    Some(l) => l.u.clone(),
                    None => s.map.components[0].clone(),
                };
                let scaling = verify_scaling_identities(&spec, &u).map_err(|e| e.to_string())?;
                let est = verify_interior_estimate(&spec, &u).map_err(|e| e.to_string())?;
                let mut violations = Vec::new();
                if scaling.max_defect() > cfg.tolerances.scaling {
                    violations.push(format!("scaling identity defect {:e}", scaling.max_defect()));
                }
                Ok(Outcome {
                    lhs: Some(est.lhs),
                    rhs: Some(est.rhs),
                    ratio: Some(est.ratio),
                    detail: json!({ "s": spec.s, "scaling": scaling }),
                    violations,
                    ..Outcome::default()
                })
            }
            Mode::Search => {
                let search = s.search.as_ref().ok_or("search mode needs a [search] section")?;
                search_outcome(search, cfg, p, n)
            }
        }
    }
}

/// A built-in map family sampled at `n` nodes per axis.
pub fn family(name: &str, n: usize) -> Option<MapFamily> {
    match name {
        "affine" => Some(fixtures::affine_family(n)),
        "sine" => Some(fixtures::sine_family(n)),
        "graph" => Some(fixtures::graph_family(n)),
        _ => None,
    }
}

fn search_outcome(search: &SearchConfig, cfg: &RunConfig, p: f64, n: usize) -> Result<Outcome, String> {
    let fam = family(&search.family, n).ok_or_else(|| format!("unknown family '{}'", search.family))?;
    let mut opts = SearchOptions { seed: cfg.seed, global: global_options(cfg, p), ..SearchOptions::default() };
    if let Some(r) = search.restarts {
        opts.restarts = r;
    }
    if let Some(c) = search.max_contractions {
        opts.max_contractions = c;
    }
    let res = extremal_ratio_search(&fam, &opts).map_err(|e| e.to_string())?;
    Ok(Outcome { ratio: Some(res.best_ratio), detail: to_value(&res), ..Outcome::default() })
}

fn record(scenario: &str, mode: Mode, p: f64, n: usize, run: impl FnOnce() -> Result<Outcome, String>) -> Record {
    let start = Instant::now();
    let res = run();
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut rec = Record {
        scenario: scenario.to_string(),
        mode,
        p,
        resolution: n,
        status: Status::Ok,
        error: None,
        violations: Vec::new(),
        lhs: None,
        rhs: None,
        ratio: None,
        terms: None,
        cover: None,
        certificates: Value::Array(vec![]),
        detail: Value::Null,
        caveat: CAVEAT.to_string(),
        elapsed_ms,
    };
    match res {
        Ok(o) => {
            rec.status = if o.violations.is_empty() { Status::Ok } else { Status::Violated };
            rec.lhs = o.lhs;
            rec.rhs = o.rhs;
            rec.ratio = o.ratio;
            rec.terms = o.terms;
            rec.cover = o.cover;
            rec.certificates = to_value(&o.certificates);
            rec.detail = o.detail;
            rec.violations = o.violations;
        }
        Err(e) => {
            rec.status = Status::Error;
            rec.error = Some(e);
        }
    }
    rec
}

/// One record per (mode, p, grid level), ordered by mode, then p, then level.
pub fn run_scenario(s: &Scenario) -> Vec<Record> {
    let mut runner = Runner { s, radii: HashMap::new() };
    let mut out = Vec::new();
    for &mode in &s.run.modes {
        for &p in &s.run.p {
            for &n in &s.run.ladder {
                out.push(record(&s.name, mode, p, n, || runner.run(mode, p, n)));
            }
        }
    }
    out
}

/// Extremal search over a built-in family, without a scenario file.
pub fn run_family_search(search: &SearchConfig, cfg: &RunConfig) -> Vec<Record> {
    let name = format!("family:{}", search.family);
    let mut out = Vec::new();
    for &p in &cfg.p {
        for &n in &cfg.ladder {
            out.push(record(&name, Mode::Search, p, n, || search_outcome(search, cfg, p, n)));
        }
    }
    out
}

/// Harmonic radius estimates of the source and target models at each level.
pub fn radius_records(s: &Scenario) -> Vec<Value> {
    let mut out = Vec::new();
    for &n in &s.run.ladder {
        let problem = level_problem(s, n);
        let opts = global_options(&s.run, 2.0);
        for (side, model) in [("source", &problem.source), ("target", &problem.target)] {
            let start = Instant::now();
            let res = model_radius(model, &opts);
            let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            let mut v = json!({
                "scenario": s.name,
                "manifold": side,
                "chart": model.chart().name,
                "resolution": model.chart().bounds.resolution[0],
            });
            match res {
                Ok((radius, estimates)) => {
                    v["status"] = json!("ok");
                    v["radius"] = to_value(&radius);
                    v["declared"] = json!(model.harmonic_radius.is_some());
                    v["certificates"] = to_value(&estimates);
                }
                Err(e) => {
                    v["status"] = json!("error");
                    v["error"] = json!(e.to_string());
                }
            }
            v["elapsed_ms"] = json!(elapsed_ms);
            out.push(v);
        }
    }
    out
}
