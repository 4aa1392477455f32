//! Single-photon preparation from two copies of `|2⟩` on five modes.
//!
//! Mode 4 carries the ancilla copy and splits onto mode 3, where `x₃` is
//! measured. Mode 1 carries the signal copy and splits onto mode 2. The
//! ancilla is displaced by the feed-forward amount, modes 2 and 4 meet on a
//! balanced splitter and are heralded at `x₂ = 0`, `p₄ = 0`, and finally mode 1
//! meets vacuum mode 5, heralded at `x₅`.
//!
//! The displacement on mode 4 is moved through the balanced splitter and into
//! the detector windows, which keeps every cutoff at its photon-number bound.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::herald;
use super::vacuum::{feedforward_alpha, RootChoice};
use crate::density::DensityMatrix;
use crate::error::{Result, SimError};
use crate::fock::{BeamSplitter, Mode, ModeState, MultiModeState};
use crate::measurement::{displaced_window, project_sharp, Acceptance, QuadratureKind, Window};
use crate::quadrature::GaussLegendre;

/// Boundary density allowed relative to the peak before the grid is rejected.
pub const GRID_EDGE_TOLERANCE: f64 = 1e-8;

/// Gauss–Legendre grid for the `x₃` average.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct X3Grid {
    pub half_range: f64,
    pub nodes: usize,
}

impl Default for X3Grid {
    fn default() -> Self {
        Self {
            half_range: 6.0,
            nodes: 81,
        }
    }
}

impl X3Grid {
    /// At least six vacuum standard deviations and 41 nodes.
    pub fn validate(&self) -> Result<()> {
        let min_range = 6.0 * FRAC_1_SQRT_2;
        if !(self.half_range >= min_range) || !self.half_range.is_finite() {
            return Err(SimError::InvalidParameter(format!(
                "x3 half-range {} is below {min_range:.3}",
                self.half_range
            )));
        }
        if self.nodes < 41 {
            return Err(SimError::InvalidParameter(format!(
                "x3 grid needs at least 41 nodes, got {}",
                self.nodes
            )));
        }
        Ok(())
    }

    pub(crate) fn points(&self) -> Vec<(f64, f64)> {
        GaussLegendre::new(self.nodes).on_interval(-self.half_range, self.half_range)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub t_a: BeamSplitter,
    pub t_b: BeamSplitter,
    pub t_c: BeamSplitter,
    pub acceptance: Acceptance,
    pub x3_grid: X3Grid,
    /// Cutoff of modes 2 and 4 after they meet; four photons at most.
    pub cutoff: usize,
    /// Accept only `x₃` within this half-width of the Hermite root and skip
    /// the displacement.
    pub postselect: Option<f64>,
}

impl PipelineParams {
    pub fn new(t_a: f64, t_b: f64, t_c: f64, acceptance: Acceptance) -> Result<Self> {
        Ok(Self {
            t_a: BeamSplitter::new(t_a)?,
            t_b: BeamSplitter::new(t_b)?,
            t_c: BeamSplitter::new(t_c)?,
            acceptance,
            x3_grid: X3Grid::default(),
            cutoff: 4,
            postselect: None,
        })
    }

    /// Transmittances 0.62, 0.79, 0.90.
    pub fn optimal(acceptance: Acceptance) -> Self {
        Self::new(0.62, 0.79, 0.90, acceptance).expect("valid transmittances")
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_splitters()?;
        if let Some(w) = self.postselect {
            if !(w > 0.0) {
                return Err(SimError::InvalidParameter(
                    "post-selection half-width must be positive".into(),
                ));
            }
            if self.x3_grid.nodes == 0 {
                return Err(SimError::InvalidParameter("x3 grid has no nodes".into()));
            }
        } else {
            self.x3_grid.validate()?;
        }
        Ok(())
    }

    fn validate_splitters(&self) -> Result<()> {
        for (name, bs) in [("t_a", self.t_a), ("t_b", self.t_b), ("t_c", self.t_c)] {
            if bs.t() <= 0.0 || bs.r() <= 0.0 {
                return Err(SimError::InvalidParameter(format!(
                    "{name} = {} must lie strictly between 0 and 1",
                    bs.t()
                )));
            }
        }
        Ok(())
    }
}

/// Herald values for one `x₃` outcome.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeraldRecord {
    pub x2_target: f64,
    pub p4_target: f64,
    pub x5_target: f64,
    pub x3_value: f64,
    pub alpha: f64,
    pub success_density: f64,
}

/// `x₅ = −r_b (t_a² + 2(√2 x₃ − 1) r_a²) / (2√2 t_a r_a t_b r_c)`.
pub fn herald_x5(x3: f64, params: &PipelineParams) -> Result<f64> {
    params.validate_splitters()?;
    let (ta, ra) = (params.t_a.t(), params.t_a.r());
    let (tb, rb) = (params.t_b.t(), params.t_b.r());
    let rc = params.t_c.r();
    Ok(-rb * (ta * ta + 2.0 * (SQRT_2 * x3 - 1.0) * ra * ra) / (2.0 * SQRT_2 * ta * ra * tb * rc))
}

/// Conditional single-mode state on mode 1 for one `x₃` outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalOutcome {
    pub rho: DensityMatrix,
    pub herald: HeraldRecord,
}

impl ConditionalOutcome {
    pub fn fidelity(&self) -> f64 {
        self.rho.population(1)
    }
}

const M1: Mode = Mode(1);
const M2: Mode = Mode(2);
const M3: Mode = Mode(3);
const M4: Mode = Mode(4);
const M5: Mode = Mode(5);

/// State of modes 1, 2, 4, 5 just before the heralds, with the mode-4
/// displacement not yet applied. Its squared norm is the `x₃` density.
fn pre_herald_state(x3: f64, params: &PipelineParams) -> Result<MultiModeState> {
    let two = ModeState::fock(2, 2)?;
    let vac = ModeState::vacuum(2);
    let ancilla = MultiModeState::product(&[(M4, &two), (M3, &vac)])?.apply_beam_splitter((M4, M3), &params.t_a)?;
    let ancilla = project_sharp(&ancilla, M3, QuadratureKind::Amplitude, x3)?.into_mode_state()?;
    let signal = MultiModeState::product(&[(M1, &two), (M2, &vac)])?.apply_beam_splitter((M1, M2), &params.t_b)?;
    signal
        .tensor(M4, &ancilla)?
        .tensor(M5, &ModeState::vacuum(2))?
        .with_cutoff(M2, params.cutoff)?
        .with_cutoff(M4, params.cutoff)?
        .apply_beam_splitter((M2, M4), &BeamSplitter::balanced())?
        .apply_beam_splitter((M1, M5), &params.t_c)
}

/// `ρ₁(x₃)` and the joint success density `P_S(x₃)`.
pub fn two_photon_pipeline_conditional(x3: f64, params: &PipelineParams) -> Result<ConditionalOutcome> {
    params.validate_splitters()?;
    let root = FRAC_1_SQRT_2;
    let (alpha, x5) = match params.postselect {
        Some(_) => (0.0, herald_x5(root, params)?),
        None => (
            feedforward_alpha(2, x3, &params.t_a, RootChoice::Largest)?,
            herald_x5(x3, params)?,
        ),
    };
    let state = pre_herald_state(x3, params)?;
    // D₄(α) followed by the balanced splitter equals the splitter followed by
    // D₂(−α/√2) D₄(α/√2); those displacements shift the x₂ and p₄ windows.
    let bal = BeamSplitter::balanced();
    let centered = Window::new(0.0, 0.0)?;
    let x2 = displaced_window(QuadratureKind::Amplitude, centered, C64::new(-bal.r() * alpha, 0.0)).center;
    let p4 = displaced_window(QuadratureKind::Phase, centered, C64::new(bal.t() * alpha, 0.0)).center;
    let unnormalized = herald(
        &state,
        &[
            (M2, QuadratureKind::Amplitude, x2),
            (M4, QuadratureKind::Phase, p4),
            (M5, QuadratureKind::Amplitude, x5),
        ],
        params.acceptance,
    )?;
    let success_density = unnormalized.trace().max(0.0);
    let rho = if success_density > 0.0 {
        unnormalized.normalized()?
    } else {
        unnormalized
    };
    Ok(ConditionalOutcome {
        rho,
        herald: HeraldRecord {
            x2_target: 0.0,
            p4_target: 0.0,
            x5_target: x5,
            x3_value: x3,
            alpha,
            success_density,
        },
    })
}

/// Sharp-herald success density at `x₃`; the optimiser's objective.
pub fn sharp_success_density(x3: f64, params: &PipelineParams) -> Result<f64> {
    let sharp = PipelineParams {
        acceptance: Acceptance::Sharp,
        ..*params
    };
    Ok(two_photon_pipeline_conditional(x3, &sharp)?.herald.success_density)
}

/// `ρ₁` averaged over `x₃` with weight `P_S(x₃)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragedOutcome {
    pub rho: DensityMatrix,
    pub success_probability: f64,
    pub nodes: usize,
}

impl AveragedOutcome {
    pub fn fidelity(&self) -> f64 {
        self.rho.population(1)
    }
}

pub fn two_photon_pipeline_averaged(params: &PipelineParams) -> Result<AveragedOutcome> {
    params.validate()?;
    let points = match params.postselect {
        Some(w) => GaussLegendre::new(params.x3_grid.nodes).on_interval(FRAC_1_SQRT_2 - w, FRAC_1_SQRT_2 + w),
        None => params.x3_grid.points(),
    };
    let outcomes = points
        .par_iter()
        .map(|&(x3, _)| two_photon_pipeline_conditional(x3, params))
        .collect::<Result<Vec<_>>>()?;

    if params.postselect.is_none() {
        let peak = outcomes.iter().map(|o| o.herald.success_density).fold(0.0, f64::max);
        let l = params.x3_grid.half_range;
        let edge = [-l, l]
            .iter()
            .map(|&x| two_photon_pipeline_conditional(x, params).map(|o| o.herald.success_density))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if peak > 0.0 && edge > GRID_EDGE_TOLERANCE * peak {
            return Err(SimError::GridTooNarrow { ratio: edge / peak });
        }
    }

    let mut acc = DensityMatrix::zeros(vec![M1], vec![2]);
    let mut total = 0.0;
    for (o, &(_, w)) in outcomes.iter().zip(&points) {
        let weight = w * o.herald.success_density;
        if weight > 0.0 {
            acc.add_scaled(&o.rho, weight)?;
            total += weight;
        }
    }
    if !(total > 0.0) {
        return Err(SimError::ZeroProbability);
    }
    Ok(AveragedOutcome {
        rho: acc.scaled(1.0 / total),
        success_probability: total,
        nodes: points.len(),
    })
}
