//! Nelder–Mead search over the three pipeline transmittances for the largest
//! sharp-herald success density.

use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::measurement::Acceptance;
use crate::protocols::{sharp_success_density, PipelineParams, X3Grid};

pub const BOX_LOW: f64 = 0.01;
pub const BOX_HIGH: f64 = 0.99;

/// What "success in the narrow-window limit" is taken to mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Success density at `x₃ = 1/√2`, where no feed-forward displacement is needed.
    #[default]
    AtHermiteRoot,
    /// Success density integrated over every `x₃` outcome.
    IntegratedOverX3,
}

impl Objective {
    /// Objective at `(t_a, t_b, t_c)`; invalid or failing points score `−∞`.
    pub fn value(&self, t: [f64; 3]) -> f64 {
        self.try_value(t)
            .ok()
            .filter(|v| v.is_finite())
            .unwrap_or(f64::NEG_INFINITY)
    }

    fn try_value(&self, t: [f64; 3]) -> Result<f64> {
        let params = PipelineParams::new(t[0], t[1], t[2], Acceptance::Sharp)?;
        match self {
            Objective::AtHermiteRoot => sharp_success_density(FRAC_1_SQRT_2, &params),
            Objective::IntegratedOverX3 => {
                let grid = X3Grid::default();
                grid.points()
                    .iter()
                    .map(|&(x, w)| Ok(w * sharp_success_density(x, &params)?))
                    .sum()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub objective: Objective,
    pub starts: usize,
    pub seed: u64,
    /// Stop once the simplex diameter falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            objective: Objective::default(),
            starts: 5,
            seed: 0,
            tolerance: 1e-4,
            max_iterations: 2000,
            initial_step: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub best: [f64; 3],
    pub value: f64,
    pub diameter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub t_a: f64,
    pub t_b: f64,
    pub t_c: f64,
    pub objective: f64,
    pub start: [f64; 3],
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

impl OptimizationResult {
    pub fn point(&self) -> [f64; 3] {
        [self.t_a, self.t_b, self.t_c]
    }
}

fn clamp(p: [f64; 3]) -> [f64; 3] {
    p.map(|v| v.clamp(BOX_LOW, BOX_HIGH))
}

fn diameter(simplex: &[([f64; 3], f64)]) -> f64 {
    let mut d = 0.0f64;
    for (i, (a, _)) in simplex.iter().enumerate() {
        for (b, _) in &simplex[i + 1..] {
            let dist = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            d = d.max(dist);
        }
    }
    d
}

/// Maximises `f` from `start` with reflection 1, expansion 2, contraction ½ and
/// shrink ½, every trial point clamped into `[0.01, 0.99]³`.
pub fn nelder_mead(
    f: impl Fn([f64; 3]) -> f64 + Sync,
    start: [f64; 3],
    config: &OptimizerConfig,
) -> OptimizationResult {
    let start = clamp(start);
    let mut vertices = vec![start];
    for k in 0..3 {
        let mut v = start;
        v[k] += if v[k] + config.initial_step <= BOX_HIGH {
            config.initial_step
        } else {
            -config.initial_step
        };
        vertices.push(clamp(v));
    }
    let values: Vec<f64> = vertices.par_iter().map(|&v| f(v)).collect();
    let mut simplex: Vec<([f64; 3], f64)> = vertices.into_iter().zip(values).collect();
    let mut evaluations = 4;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let order = |s: &mut Vec<([f64; 3], f64)>| s.sort_by(|a, b| b.1.total_cmp(&a.1));

    order(&mut simplex);
    while iterations < config.max_iterations {
        let d = diameter(&simplex);
        trace.push(TraceEntry {
            iteration: iterations,
            best: simplex[0].0,
            value: simplex[0].1,
            diameter: d,
        });
        if d < config.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let worst = simplex[3];
        let mut centroid = [0.0; 3];
        for (v, _) in &simplex[..3] {
            for k in 0..3 {
                centroid[k] += v[k] / 3.0;
            }
        }
        let along =
            |coef: f64| -> [f64; 3] { clamp(std::array::from_fn(|k| centroid[k] + coef * (centroid[k] - worst.0[k]))) };

        let reflected = along(1.0);
        let fr = f(reflected);
        evaluations += 1;
        if fr > simplex[0].1 {
            let expanded = along(2.0);
            let fe = f(expanded);
            evaluations += 1;
            simplex[3] = if fe > fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr > simplex[2].1 {
            simplex[3] = (reflected, fr);
        } else {
            // outside contraction if the reflection beat the worst vertex, inside otherwise
            let (coef, threshold) = if fr > worst.1 { (0.5, fr) } else { (-0.5, worst.1) };
            let contracted = along(coef);
            let fc = f(contracted);
            evaluations += 1;
            if fc > threshold || (coef > 0.0 && fc == threshold) {
                simplex[3] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                let shrunk: Vec<[f64; 3]> = simplex[1..]
                    .iter()
                    .map(|(v, _)| clamp(std::array::from_fn(|k| best[k] + 0.5 * (v[k] - best[k]))))
                    .collect();
                let values: Vec<f64> = shrunk.par_iter().map(|&v| f(v)).collect();
                evaluations += 3;
                for (slot, pair) in simplex[1..].iter_mut().zip(shrunk.into_iter().zip(values)) {
                    *slot = pair;
                }
            }
        }
        order(&mut simplex);
    }

    let (best, value) = simplex[0];
    OptimizationResult {
        t_a: best[0],
        t_b: best[1],
        t_c: best[2],
        objective: value,
        start,
        iterations,
        evaluations,
        converged,
        trace,
    }
}

/// Single Nelder–Mead run of the pipeline objective.
pub fn optimize_transmittances(start: [f64; 3], config: &OptimizerConfig) -> Result<OptimizationResult> {
    if start.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(SimError::InvalidParameter(format!(
            "start {start:?} must lie inside the open unit cube"
        )));
    }
    let objective = config.objective;
    Ok(nelder_mead(|t| objective.value(t), start, config))
}

/// Radical inverse of `index` in `base`.
fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Quasi-random starting points in `[0.1, 0.9]³`, offset along the sequence by the seed.
pub fn halton_starts(count: usize, seed: u64) -> Vec<[f64; 3]> {
    (0..count as u64)
        .map(|i| {
            let idx = seed.wrapping_add(i + 1);
            [2, 3, 5].map(|b| 0.1 + 0.8 * halton(idx, b))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiStartResult {
    pub best: OptimizationResult,
    pub runs: Vec<OptimizationResult>,
}

/// Independent runs from quasi-random starts; the best objective wins, ties
/// going to the earlier start.
pub fn optimize_multistart(config: &OptimizerConfig) -> Result<MultiStartResult> {
    if config.starts == 0 {
        return Err(SimError::InvalidParameter("at least one start is needed".into()));
    }
    let runs = halton_starts(config.starts, config.seed)
        .into_par_iter()
        .map(|s| optimize_transmittances(s, config))
        .collect::<Result<Vec<_>>>()?;
    let best = runs
        .iter()
        .fold(None::<&OptimizationResult>, |acc, r| match acc {
            Some(b) if b.objective >= r.objective => Some(b),
            _ => Some(r),
        })
        .expect("at least one run")
        .clone();
    Ok(MultiStartResult { best, runs })
}
