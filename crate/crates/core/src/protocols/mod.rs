//! State-engineering procedures built from the Fock-space and measurement layers.

mod general;
mod pipeline;
mod subtraction;
mod vacuum;

pub use general::{prep_single_photon_general, GeneralOutcome, GeneralParams, StageParams};
pub use pipeline::{
    herald_x5, sharp_success_density, two_photon_pipeline_averaged, two_photon_pipeline_conditional, AveragedOutcome,
    ConditionalOutcome, HeraldRecord, PipelineParams, X3Grid,
};
pub use subtraction::{
    align_phases, final_vacuum_cancellation, photon_subtract_analytic, photon_subtract_sharp,
    photon_subtract_simulated, vacuum_cancellation_target,
};
pub use vacuum::{
    feedforward_alpha, remove_vacuum_displace, remove_vacuum_feedforward, solve_vacuum_removal_displacement,
    DisplacementRoots, FeedForwardOutcome, RootChoice, VacuumFree,
};

use num_complex::Complex64 as C64;

use crate::density::DensityMatrix;
use crate::error::{Result, SimError};
use crate::fock::{Mode, ModeState, MultiModeState};
use crate::measurement::{collapse_joint, project_sharp, Acceptance, Homodyne, QuadratureKind, Window};

/// A normalised resource `Σ_{k≤N} c_k |k⟩` with `c_N ≠ 0`, stored with cutoff `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResourceState {
    psi: ModeState,
}

impl ResourceState {
    /// Normalises and trims trailing zero amplitudes.
    pub fn new(psi: ModeState) -> Result<Self> {
        let psi = psi.normalize()?;
        let top = psi.top_level(1e-14).ok_or(SimError::ZeroProbability)?;
        let psi = psi.with_cutoff(top)?.normalize()?;
        Ok(Self { psi })
    }

    pub fn fock(n: usize) -> Result<Self> {
        Self::new(ModeState::fock(n, n)?)
    }

    pub fn from_coefficients(coeffs: &[C64]) -> Result<Self> {
        Self::new(ModeState::from_amplitudes(coeffs.to_vec())?)
    }

    pub fn state(&self) -> &ModeState {
        &self.psi
    }

    pub fn top_level(&self) -> usize {
        self.psi.cutoff()
    }

    /// True when the resource is a single Fock state.
    pub fn is_fock(&self) -> bool {
        (0..self.top_level()).all(|k| self.psi.amplitude(k).norm() < 1e-14)
    }
}

/// Unnormalised conditional state after heralding. Its trace is the success
/// probability for windows, or the outcome density for sharp projections.
#[derive(Clone, Debug, PartialEq)]
pub struct Heralded {
    pub unnormalized: DensityMatrix,
}

impl Heralded {
    pub fn weight(&self) -> f64 {
        self.unnormalized.trace()
    }

    pub fn conditional(&self) -> Result<DensityMatrix> {
        self.unnormalized.normalized()
    }
}

/// Measures each `(mode, kind, center)` either sharply or with a window of the
/// configured half-width around the center.
pub(crate) fn herald(
    state: &MultiModeState,
    detectors: &[(Mode, QuadratureKind, f64)],
    acceptance: Acceptance,
) -> Result<DensityMatrix> {
    match acceptance {
        Acceptance::Sharp => {
            let mut s = state.clone();
            for &(mode, kind, center) in detectors {
                s = project_sharp(&s, mode, kind, center)?;
            }
            Ok(DensityMatrix::from_pure(&s))
        }
        Acceptance::Window { half_width } => {
            let homodynes = detectors
                .iter()
                .map(|&(mode, kind, center)| {
                    Ok(Homodyne {
                        mode,
                        kind,
                        window: Window::new(center, half_width)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(collapse_joint(state, &homodynes)?.unnormalized)
        }
    }
}
