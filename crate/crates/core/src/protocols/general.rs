//! Single-photon preparation from `N` copies of an arbitrary resource: `N − 1`
//! subtraction stages, each fed by a vacuum-free ancilla made from a fresh
//! copy, then the final vacuum cancellation.
//!
//! Ancilla displacements are never applied in the Fock basis. Each one is
//! moved through the balanced EPR splitter and shifts the detector windows.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{X3Grid, GRID_EDGE_TOLERANCE};
use super::subtraction::vacuum_cancellation_target;
use super::vacuum::{feedforward_alpha, feedforward_branch, solve_vacuum_removal_displacement, RootChoice};
use super::{herald, ResourceState};
use crate::density::DensityMatrix;
use crate::error::{Result, SimError};
use crate::fock::{BeamSplitter, Mode, ModeState};
use crate::measurement::{displaced_window, epr_interfere, Acceptance, QuadratureKind, Window};

const SIGNAL: Mode = Mode(1);
const IDLER: Mode = Mode(2);
const ANCILLA: Mode = Mode(4);
const PROBE: Mode = Mode(5);

/// Splitters of one subtraction stage. `vacuum_removal` is only used when the
/// ancilla needs the measured feed-forward variant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageParams {
    pub subtraction: BeamSplitter,
    pub vacuum_removal: BeamSplitter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralParams {
    /// One entry per subtraction stage; a resource with top level `N` needs `N − 1`.
    pub stages: Vec<StageParams>,
    pub final_splitter: BeamSplitter,
    pub acceptance: Acceptance,
    pub x3_grid: X3Grid,
    pub root_choice: RootChoice,
}

impl GeneralParams {
    /// Same splitters at every stage.
    pub fn uniform(stages: usize, stage: StageParams, final_splitter: BeamSplitter, acceptance: Acceptance) -> Self {
        Self {
            stages: vec![stage; stages],
            final_splitter,
            acceptance,
            x3_grid: X3Grid::default(),
            root_choice: RootChoice::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralOutcome {
    pub rho: DensityMatrix,
    pub success_probability: f64,
    /// Stages whose ancilla came from a measured feed-forward.
    pub feedforward_stages: usize,
    pub branches: usize,
}

impl GeneralOutcome {
    pub fn fidelity(&self) -> f64 {
        self.rho.population(1)
    }
}

#[derive(Clone, Debug)]
enum AncillaPlan {
    /// The resource itself, to be displaced by a fixed root.
    Displaced(ModeState, C64),
    /// `|N⟩` split and measured; displacement from the outcome.
    FeedForward(usize, BeamSplitter, RootChoice),
}

impl AncillaPlan {
    /// Undisplaced ancilla (norm² is the outcome density) and its displacement.
    fn realize(&self, x3: Option<f64>) -> Result<(ModeState, C64)> {
        match self {
            AncillaPlan::Displaced(psi, alpha) => Ok((psi.clone(), *alpha)),
            AncillaPlan::FeedForward(n, bs, choice) => {
                let x3 = x3.expect("feed-forward stage has an outcome");
                let alpha = feedforward_alpha(*n, x3, bs, *choice)?;
                let branch = feedforward_branch(*n, bs, x3, ANCILLA)?.into_mode_state()?;
                Ok((branch, C64::new(alpha, 0.0)))
            }
        }
    }
}

fn plan_ancillas(resource: &ResourceState, params: &GeneralParams) -> Result<Vec<AncillaPlan>> {
    if params.stages.is_empty() {
        return Ok(Vec::new());
    }
    let n = resource.top_level();
    let shared = match solve_vacuum_removal_displacement(resource) {
        Ok(roots) => Some(AncillaPlan::Displaced(resource.state().clone(), roots.chosen)),
        Err(SimError::DegenerateResource) if resource.is_fock() => None,
        Err(e) => return Err(e),
    };
    Ok(params
        .stages
        .iter()
        .map(|s| {
            shared
                .clone()
                .unwrap_or(AncillaPlan::FeedForward(n, s.vacuum_removal, params.root_choice))
        })
        .collect())
}

/// Runs the subtraction stages for one set of feed-forward outcomes and
/// returns the unnormalised state of the signal mode.
fn run_stages(
    resource: &ResourceState,
    params: &GeneralParams,
    plans: &[AncillaPlan],
    outcomes: &[f64],
    acceptance: Acceptance,
) -> Result<DensityMatrix> {
    let n = resource.top_level();
    let mut rho = DensityMatrix::from_mode_state(SIGNAL, resource.state());
    let mut measured = outcomes.iter();
    let centered = Window::new(0.0, 0.0)?;
    let bal = BeamSplitter::balanced();
    for (stage, plan) in params.stages.iter().zip(plans) {
        let x3 = match plan {
            AncillaPlan::FeedForward(..) => measured.next().copied(),
            AncillaPlan::Displaced(..) => None,
        };
        let (phi, alpha) = plan.realize(x3)?;
        let phi = phi.with_cutoff(n)?;
        let x_center = displaced_window(QuadratureKind::Amplitude, centered, -alpha * bal.r()).center;
        let p_center = displaced_window(QuadratureKind::Phase, centered, alpha * bal.t()).center;
        let mut next = DensityMatrix::zeros(vec![SIGNAL], vec![n]);
        for member in rho.ensemble() {
            let state = member
                .tensor(IDLER, &ModeState::vacuum(n))?
                .tensor(ANCILLA, &phi)?
                .apply_beam_splitter((SIGNAL, IDLER), &stage.subtraction)?;
            let mixed = epr_interfere(&state, (IDLER, ANCILLA))?;
            let heralded = herald(
                &mixed,
                &[
                    (IDLER, QuadratureKind::Amplitude, x_center),
                    (ANCILLA, QuadratureKind::Phase, p_center),
                ],
                acceptance,
            )?;
            next.add_scaled(&heralded, 1.0)?;
        }
        rho = next;
    }
    Ok(rho)
}

/// Phase shift and `x` target of the final step, read from the sharp chain.
fn final_settings(
    resource: &ResourceState,
    params: &GeneralParams,
    plans: &[AncillaPlan],
    outcomes: &[f64],
) -> Result<(f64, f64)> {
    let sharp = run_stages(resource, params, plans, outcomes, Acceptance::Sharp)?;
    let psi = sharp
        .ensemble()
        .into_iter()
        .next()
        .ok_or(SimError::ZeroProbability)?
        .into_mode_state()?;
    let (a0, a1) = (psi.amplitude(0), psi.amplitude(1));
    if a1.norm() == 0.0 {
        return Err(SimError::ZeroProbability);
    }
    // smallest rotation making a₀/a₁ real; a sign is left in the ratio
    let shift = if a0.norm() > 0.0 {
        let d = a0.arg() - a1.arg();
        d - std::f64::consts::PI * (d / std::f64::consts::PI).round()
    } else {
        0.0
    };
    let ratio = a0 / (a1 * C64::from_polar(1.0, shift));
    let x = vacuum_cancellation_target(ratio.re, 1.0, &params.final_splitter)?;
    Ok((shift, x))
}

fn run_branch(
    resource: &ResourceState,
    params: &GeneralParams,
    plans: &[AncillaPlan],
    outcomes: &[f64],
) -> Result<DensityMatrix> {
    let (shift, x) = final_settings(resource, params, plans, outcomes)?;
    let rho = run_stages(resource, params, plans, outcomes, params.acceptance)?;
    let n = resource.top_level().max(1);
    let mut out = DensityMatrix::zeros(vec![SIGNAL], vec![n]);
    for member in rho.ensemble() {
        let psi = member.into_mode_state()?.with_cutoff(n)?.apply_phase(shift);
        let state = crate::fock::MultiModeState::single(SIGNAL, psi)
            .tensor(PROBE, &ModeState::vacuum(n))?
            .apply_beam_splitter((SIGNAL, PROBE), &params.final_splitter)?;
        let heralded = herald(&state, &[(PROBE, QuadratureKind::Amplitude, x)], params.acceptance)?;
        out.add_scaled(&heralded, 1.0)?;
    }
    Ok(out)
}

/// Prepares `|1⟩` from copies of `resource`, averaging over every measured
/// feed-forward outcome on the configured grid.
pub fn prep_single_photon_general(resource: &ResourceState, params: &GeneralParams) -> Result<GeneralOutcome> {
    let n = resource.top_level();
    if n == 0 {
        return Err(SimError::InvalidParameter(
            "the resource must contain at least one photon".into(),
        ));
    }
    if params.stages.len() + 1 != n {
        return Err(SimError::InvalidParameter(format!(
            "a resource with top level {n} needs {} subtraction stages, got {}",
            n - 1,
            params.stages.len()
        )));
    }
    let plans = plan_ancillas(resource, params)?;
    let ff: Vec<&AncillaPlan> = plans
        .iter()
        .filter(|p| matches!(p, AncillaPlan::FeedForward(..)))
        .collect();
    let points = if ff.is_empty() {
        Vec::new()
    } else {
        params.x3_grid.validate()?;
        params.x3_grid.points()
    };
    for plan in &ff {
        check_grid_edges(plan, &params.x3_grid, &points)?;
    }

    // every combination of feed-forward outcomes, first stage slowest
    let branches: Vec<(Vec<f64>, f64)> = (0..points.len().pow(ff.len() as u32))
        .map(|mut idx| {
            let mut xs = vec![0.0; ff.len()];
            let mut w = 1.0;
            for slot in xs.iter_mut().rev() {
                let (x, wx) = points[idx % points.len()];
                *slot = x;
                w *= wx;
                idx /= points.len();
            }
            (xs, w)
        })
        .collect();
    let results = branches
        .par_iter()
        .map(|(xs, _)| run_branch(resource, params, &plans, xs))
        .collect::<Result<Vec<_>>>()?;

    let mut acc = DensityMatrix::zeros(vec![SIGNAL], vec![n]);
    for (rho, (_, w)) in results.iter().zip(&branches) {
        acc.add_scaled(rho, *w)?;
    }
    let total = acc.trace();
    if !(total > 0.0) {
        return Err(SimError::ZeroProbability);
    }
    Ok(GeneralOutcome {
        rho: acc.scaled(1.0 / total),
        success_probability: total,
        feedforward_stages: ff.len(),
        branches: branches.len(),
    })
}

fn check_grid_edges(plan: &AncillaPlan, grid: &X3Grid, points: &[(f64, f64)]) -> Result<()> {
    let density = |x: f64| plan.realize(Some(x)).map(|(phi, _)| phi.norm_sqr());
    let peak = points
        .iter()
        .map(|&(x, _)| density(x))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let edge = density(-grid.half_range)?.max(density(grid.half_range)?);
    if peak > 0.0 && edge > GRID_EDGE_TOLERANCE * peak {
        return Err(SimError::GridTooNarrow { ratio: edge / peak });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{two_photon_pipeline_averaged, PipelineParams};
    use approx::assert_abs_diff_eq;

    fn stage(sub: f64, vr: f64) -> StageParams {
        StageParams {
            subtraction: BeamSplitter::new(sub).unwrap(),
            vacuum_removal: BeamSplitter::new(vr).unwrap(),
        }
    }

    #[test]
    fn superposition_resource_needs_one_copy() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let res = ResourceState::new(ModeState::from_real(&[h, h]).unwrap()).unwrap();
        let params = GeneralParams::uniform(0, stage(0.5, 0.5), BeamSplitter::new(0.8).unwrap(), Acceptance::Sharp);
        let out = prep_single_photon_general(&res, &params).unwrap();
        assert_eq!(out.branches, 1);
        assert_abs_diff_eq!(out.fidelity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn displaced_ancillas_reach_a_single_photon() {
        let res = ResourceState::new(ModeState::from_real(&[0.5, -0.4, 0.6, 0.3]).unwrap()).unwrap();
        let params = GeneralParams::uniform(2, stage(0.7, 0.5), BeamSplitter::new(0.8).unwrap(), Acceptance::Sharp);
        let out = prep_single_photon_general(&res, &params).unwrap();
        assert_eq!(out.feedforward_stages, 0);
        assert_abs_diff_eq!(out.fidelity(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn fock_two_matches_the_five_mode_pipeline() {
        let p = PipelineParams::optimal(Acceptance::window(0.2).unwrap());
        let mut general = GeneralParams::uniform(1, stage(0.79, 0.62), BeamSplitter::new(0.90).unwrap(), p.acceptance);
        general.root_choice = RootChoice::Largest;
        let g = prep_single_photon_general(&ResourceState::fock(2).unwrap(), &general).unwrap();
        let f = two_photon_pipeline_averaged(&p).unwrap();
        assert_abs_diff_eq!(
            g.success_probability,
            f.success_probability,
            epsilon = 1e-9 * f.success_probability
        );
        assert!(g.rho.trace_distance(&f.rho).unwrap() < 1e-8);
    }

    #[test]
    fn fock_three_with_feedforward_ancillas() {
        let mut params =
            GeneralParams::uniform(2, stage(0.75, 0.6), BeamSplitter::new(0.9).unwrap(), Acceptance::Sharp);
        params.x3_grid.nodes = 41;
        let out = prep_single_photon_general(&ResourceState::fock(3).unwrap(), &params).unwrap();
        assert_eq!(out.feedforward_stages, 2);
        assert_eq!(out.branches, 41 * 41);
        assert_abs_diff_eq!(out.fidelity(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn edge_density_rejects_the_grid() {
        let mut params =
            GeneralParams::uniform(1, stage(0.75, 0.2), BeamSplitter::new(0.9).unwrap(), Acceptance::Sharp);
        params.x3_grid.half_range = 4.3;
        assert!(matches!(
            prep_single_photon_general(&ResourceState::fock(2).unwrap(), &params),
            Err(SimError::GridTooNarrow { .. })
        ));
        params.stages.push(params.stages[0]);
        assert!(prep_single_photon_general(&ResourceState::fock(2).unwrap(), &params).is_err());
    }
}
