//! Derivative-free maximization of the global ratio over a parametric map
//! family (compass pattern search with seeded restarts).

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::global::{verify_global_estimate, GlobalOptions, GlobalProblem};
use crate::Error;

type Builder = dyn Fn(&[f64]) -> Result<GlobalProblem, Error> + Send + Sync;

pub struct MapFamily {
    pub name: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub build: Box<Builder>,
}

impl std::fmt::Debug for MapFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MapFamily")
            .field("name", &self.name)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub restarts: usize,
    /// Fraction of the box width used as the initial step.
    pub initial_step: f64,
    pub contraction: f64,
    pub max_contractions: usize,
    pub seed: u64,
    pub global: GlobalOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            restarts: 3,
            initial_step: 0.25,
            contraction: 0.5,
            max_contractions: 6,
            seed: 7,
            global: GlobalOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceEntry {
    pub restart: usize,
    pub params: Vec<f64>,
    /// Step size in effect when the point was evaluated.
    pub step: Vec<f64>,
    pub ratio: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchResult {
    pub family: String,
    pub best_params: Vec<f64>,
    pub best_ratio: f64,
    pub trace: Vec<TraceEntry>,
    /// Distinct parameter points evaluated.
    pub evaluations: usize,
}

struct Evaluator<'a> {
    family: &'a MapFamily,
    opts: &'a SearchOptions,
    cache: HashMap<Vec<u64>, Result<f64, String>>,
    trace: Vec<TraceEntry>,
}

impl Evaluator<'_> {
    fn eval(&mut self, restart: usize, x: &[f64], step: &[f64]) -> Option<f64> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let res = match self.cache.get(&key) {
            Some(r) => r.clone(),
            None => {
                let r = (self.family.build)(x)
                    .and_then(|prob| verify_global_estimate(&prob, &self.opts.global))
                    .map(|rep| rep.ratio)
                    .map_err(|e| e.to_string());
                self.cache.insert(key, r.clone());
                r
            }
        };
        self.trace.push(TraceEntry {
            restart,
            params: x.to_vec(),
            step: step.to_vec(),
            ratio: res.as_ref().ok().copied(),
            error: res.as_ref().err().cloned(),
        });
        res.ok().filter(|v| v.is_finite())
    }
}

pub fn extremal_ratio_search(family: &MapFamily, opts: &SearchOptions) -> Result<SearchResult, Error> {
    let dim = family.lower.len();
    if family.upper.len() != dim || family.lower.iter().zip(&family.upper).any(|(l, u)| !(l <= u)) {
        return Err(Error::InvalidArgument(format!("invalid parameter box for family '{}'", family.name)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut ev = Evaluator { family, opts, cache: HashMap::new(), trace: Vec::new() };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for restart in 0..opts.restarts.max(1) {
        let mut x: Vec<f64> = (0..dim)
            .map(|k| {
                let (l, u) = (family.lower[k], family.upper[k]);
                if restart == 0 {
                    0.5 * (l + u)
                } else {
                    rng.gen_range(l..=u)
                }
            })
            .collect();
        let mut step: Vec<f64> = (0..dim).map(|k| opts.initial_step * (family.upper[k] - family.lower[k])).collect();
        let mut fx = ev.eval(restart, &x, &step);
        let mut contractions = 0;
        while contractions < opts.max_contractions {
            let mut improved: Option<(Vec<f64>, f64)> = None;
            for k in 0..dim {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[k] = (y[k] + dir * step[k]).clamp(family.lower[k], family.upper[k]);
                    if y == x {
                        continue;
                    }
                    if let Some(fy) = ev.eval(restart, &y, &step) {
                        let beats_current = fx.map_or(true, |f| fy > f);
                        let beats_candidate = improved.as_ref().map_or(true, |(_, f)| fy > *f);
                        if beats_current && beats_candidate {
                            improved = Some((y, fy));
                        }
                    }
                }
            }
            match improved {
                Some((y, fy)) => {
                    x = y;
                    fx = Some(fy);
                }
                None => {
                    step.iter_mut().for_each(|s| *s *= opts.contraction);
                    contractions += 1;
                }
            }
        }
        if let Some(f) = fx {
            if best.as_ref().map_or(true, |(_, b)| f > *b) {
                best = Some((x, f));
            }
        }
    }
    let (best_params, best_ratio) = best.ok_or(Error::EmptyFeasibleSet)?;
    Ok(SearchResult {
        family: family.name.clone(),
        best_params,
        best_ratio,
        evaluations: ev.cache.len(),
        trace: ev.trace,
    })
}
