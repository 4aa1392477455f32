//! Fidelity and success probability as functions of the acceptance half-width.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::gates::{nsg_process_fidelity, AncillaSource, NsgParams};
use crate::measurement::Acceptance;
use crate::protocols::{two_photon_pipeline_averaged, PipelineParams};

/// What to evaluate at each half-width. Every herald of the task uses the
/// swept half-width; the acceptance stored in the parameters is ignored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepTask {
    SinglePhotonPrep(PipelineParams),
    Nsg(NsgParams),
}

impl SweepTask {
    /// The task with every acceptance set to `acceptance`.
    pub fn with_acceptance(&self, acceptance: Acceptance) -> Self {
        match *self {
            SweepTask::SinglePhotonPrep(p) => SweepTask::SinglePhotonPrep(PipelineParams { acceptance, ..p }),
            SweepTask::Nsg(n) => SweepTask::Nsg(NsgParams {
                projection: acceptance,
                ancilla: match n.ancilla {
                    AncillaSource::Ideal => AncillaSource::Ideal,
                    AncillaSource::Extracted(p) => AncillaSource::Extracted(PipelineParams { acceptance, ..p }),
                },
                ..n
            }),
        }
    }

    /// `(fidelity, success probability)` at one acceptance.
    pub fn evaluate(&self, acceptance: Acceptance) -> Result<(f64, f64)> {
        match self.with_acceptance(acceptance) {
            SweepTask::SinglePhotonPrep(p) => {
                let out = two_photon_pipeline_averaged(&p)?;
                Ok((out.fidelity(), out.success_probability))
            }
            SweepTask::Nsg(n) => {
                let out = nsg_process_fidelity(&n)?;
                Ok((out.fidelity, out.success_probability))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub half_width: f64,
    pub fidelity: f64,
    pub success_probability: f64,
    pub runtime_ms: u128,
}

/// Rejects empty, non-positive, non-finite or non-increasing grids.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(SimError::InvalidParameter("empty half-width grid".into()));
    }
    if grid.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(SimError::InvalidParameter(
            "half-widths must be positive and finite".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::InvalidParameter(
            "half-widths must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// One row per half-width, in grid order.
pub fn sweep_window(task: &SweepTask, grid: &[f64]) -> Result<Vec<SweepRow>> {
    validate_grid(grid)?;
    grid.par_iter()
        .map(|&x| {
            let start = Instant::now();
            let (fidelity, success_probability) = task.evaluate(Acceptance::window(x)?)?;
            Ok(SweepRow {
                half_width: x,
                fidelity,
                success_probability,
                runtime_ms: start.elapsed().as_millis(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_checks() {
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[0.1, 0.1]).is_err());
        assert!(validate_grid(&[0.0, 0.1]).is_err());
        assert!(validate_grid(&[0.1, 0.2]).is_ok());
        let g = linear_grid(0.05, 0.5, 10);
        assert_eq!(g.len(), 10);
        assert!((g[9] - 0.5).abs() < 1e-15 && (g[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn narrow_window_prep_is_nearly_exact() {
        let task = SweepTask::SinglePhotonPrep(PipelineParams::optimal(Acceptance::Sharp));
        let rows = sweep_window(&task, &[1e-3]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].fidelity > 0.999);
        assert!(sweep_window(&task, &[]).is_err());
    }

    #[test]
    fn ideal_gate_sweep_trades_fidelity_for_probability() {
        let task = SweepTask::Nsg(NsgParams::new(AncillaSource::Ideal, Acceptance::Sharp));
        let rows = sweep_window(&task, &[0.05, 0.2, 0.4]).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].fidelity < w[0].fidelity);
            assert!(w[1].success_probability > w[0].success_probability);
        }
    }
}
