//! Homodyne measurements: quadrature overlaps, sharp projections, finite
//! acceptance windows and the two-homodyne EPR projection.
//!
//! Quadratures are `x = (a + a†)/√2` and `p` with `⟨p|n⟩ = iⁿ⟨x=p|n⟩`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Result, SimError};
use crate::fock::{BeamSplitter, Mode, MultiModeState};
use crate::quadrature::{hermite_functions, GaussLegendre};

/// Starting Gauss–Legendre order for window integrals.
pub const DEFAULT_QUAD_ORDER: usize = 8;
/// Highest order tried before a window integral is declared unconverged.
pub const MAX_QUAD_ORDER: usize = 32;
/// Allowed relative disagreement between successive orders.
pub const QUAD_TOLERANCE: f64 = 1e-8;
/// Windows wider than this are split into panels of at most this width.
pub const PANEL_WIDTH: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureKind {
    /// `x̂`
    Amplitude,
    /// `p̂`
    Phase,
}

/// Acceptance interval `[center − half_width, center + half_width]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: f64,
    pub half_width: f64,
    pub quad_order: usize,
}

impl Window {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        Self::with_order(center, half_width, DEFAULT_QUAD_ORDER)
    }

    pub fn with_order(center: f64, half_width: f64, quad_order: usize) -> Result<Self> {
        if !(half_width >= 0.0) || !half_width.is_finite() || !center.is_finite() {
            return Err(SimError::InvalidParameter(format!(
                "window half-width must be finite and non-negative, got {half_width}"
            )));
        }
        if quad_order == 0 {
            return Err(SimError::InvalidParameter("quadrature order must be ≥ 1".into()));
        }
        Ok(Self {
            center,
            half_width,
            quad_order,
        })
    }

    pub fn centered_at(&self, center: f64) -> Self {
        Self { center, ..*self }
    }

    fn nodes(&self, order: usize) -> Vec<(f64, f64)> {
        let panels = ((2.0 * self.half_width) / PANEL_WIDTH).ceil().max(1.0) as usize;
        GaussLegendre::new(order).composite(self.center - self.half_width, self.center + self.half_width, panels)
    }
}

/// How a herald is accepted: on an exact quadrature value or within a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceptance {
    Sharp,
    Window { half_width: f64 },
}

impl Acceptance {
    pub fn window(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(SimError::InvalidParameter(format!(
                "acceptance half-width must be positive, got {half_width}"
            )));
        }
        Ok(Self::Window { half_width })
    }

    pub fn half_width(&self) -> f64 {
        match self {
            Acceptance::Sharp => 0.0,
            Acceptance::Window { half_width } => *half_width,
        }
    }
}

/// `⟨x|n⟩ = H_n(x) e^{−x²/2} / (π^{1/4} √(2ⁿ n!))`.
pub fn overlap_x(n: usize, x: f64) -> f64 {
    hermite_functions(x, n)[n]
}

/// `⟨p|n⟩ = iⁿ ⟨x=p|n⟩`.
pub fn overlap_p(n: usize, p: f64) -> C64 {
    i_pow(n) * overlap_x(n, p)
}

fn i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// `⟨q|n⟩` for `n = 0..=cutoff`.
pub fn overlap_vector(kind: QuadratureKind, value: f64, cutoff: usize) -> Vec<C64> {
    let psi = hermite_functions(value, cutoff);
    match kind {
        QuadratureKind::Amplitude => psi.into_iter().map(|v| C64::new(v, 0.0)).collect(),
        QuadratureKind::Phase => psi.into_iter().enumerate().map(|(n, v)| i_pow(n) * v).collect(),
    }
}

/// Contracts `mode` with `⟨q|`; the squared norm of the result is the outcome density.
pub fn project_sharp(state: &MultiModeState, mode: Mode, kind: QuadratureKind, value: f64) -> Result<MultiModeState> {
    let cutoff = state.cutoff_of(mode)?;
    state.contract(mode, &overlap_vector(kind, value, cutoff))
}

/// One windowed homodyne detector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homodyne {
    pub mode: Mode,
    pub kind: QuadratureKind,
    pub window: Window,
}

/// Conditional operator of a windowed measurement: trace equals the success probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Collapse {
    pub unnormalized: DensityMatrix,
    pub probability: f64,
}

impl Collapse {
    pub fn conditional(&self) -> Result<DensityMatrix> {
        self.unnormalized.normalized()
    }
}

pub fn collapse_windowed(state: &MultiModeState, mode: Mode, kind: QuadratureKind, window: Window) -> Result<Collapse> {
    collapse_joint(state, &[Homodyne { mode, kind, window }])
}

/// `Tr_measured[Π₁ ⋯ Π_k |ψ⟩⟨ψ|]` with `Π = ∫ |q⟩⟨q| dq` over each window,
/// integrated on a product Gauss–Legendre grid whose order is doubled until
/// successive results agree.
pub fn collapse_joint(state: &MultiModeState, detectors: &[Homodyne]) -> Result<Collapse> {
    let mut remaining_modes = state.modes().to_vec();
    let mut remaining_cutoffs = state.cutoffs().to_vec();
    for d in detectors {
        let axis = remaining_modes
            .iter()
            .position(|&m| m == d.mode)
            .ok_or(SimError::UnknownMode(d.mode))?;
        remaining_modes.remove(axis);
        remaining_cutoffs.remove(axis);
    }
    let zero = DensityMatrix::zeros(remaining_modes, remaining_cutoffs);
    if detectors.iter().any(|d| d.window.half_width == 0.0) {
        return Ok(Collapse {
            unnormalized: zero,
            probability: 0.0,
        });
    }

    let start = detectors
        .iter()
        .map(|d| d.window.quad_order)
        .max()
        .unwrap_or(DEFAULT_QUAD_ORDER);
    let integrate = |order: usize| -> Result<DensityMatrix> {
        let grids: Vec<Vec<(f64, f64)>> = detectors.iter().map(|d| d.window.nodes(order)).collect();
        let mut acc = zero.clone();
        accumulate(state, detectors, &grids, 1.0, &mut acc)?;
        Ok(acc)
    };

    let mut order = start;
    let mut coarse = integrate(order)?;
    loop {
        let fine_order = order * 2;
        let fine = integrate(fine_order)?;
        let scale = fine.trace().abs().max(f64::MIN_POSITIVE);
        let diff = (fine.entries() - coarse.entries())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if diff <= QUAD_TOLERANCE * scale {
            let probability = fine.trace();
            return Ok(Collapse {
                unnormalized: fine,
                probability,
            });
        }
        if fine_order >= MAX_QUAD_ORDER {
            return Err(SimError::QuadratureNonConvergence {
                order: fine_order,
                difference: diff / scale,
            });
        }
        order = fine_order;
        coarse = fine;
    }
}

fn accumulate(
    state: &MultiModeState,
    detectors: &[Homodyne],
    grids: &[Vec<(f64, f64)>],
    weight: f64,
    acc: &mut DensityMatrix,
) -> Result<()> {
    let Some((first, rest)) = detectors.split_first() else {
        acc.add_outer(state.amplitudes(), weight);
        return Ok(());
    };
    let cutoff = state.cutoff_of(first.mode)?;
    for &(q, w) in &grids[0] {
        let sub = state.contract(first.mode, &overlap_vector(first.kind, q, cutoff))?;
        accumulate(&sub, rest, &grids[1..], weight * w, acc)?;
    }
    Ok(())
}

/// Window to apply to the undisplaced state so that measuring it is equivalent
/// (up to an outcome-dependent global phase) to measuring `D(β)|ψ⟩` in `window`.
pub fn displaced_window(kind: QuadratureKind, window: Window, beta: C64) -> Window {
    let shift = match kind {
        QuadratureKind::Amplitude => -std::f64::consts::SQRT_2 * beta.re,
        QuadratureKind::Phase => std::f64::consts::SQRT_2 * beta.im,
    };
    window.centered_at(window.center + shift)
}

/// Contracts `Σ_n ⟨n|_i ⟨n|_j` with unit coefficients.
pub fn epr_project_ideal(state: &MultiModeState, modes: (Mode, Mode)) -> Result<MultiModeState> {
    let (i, j) = modes;
    let (ci, cj) = (state.cutoff_of(i)?, state.cutoff_of(j)?);
    if ci != cj {
        return Err(SimError::DimensionMismatch(format!(
            "EPR projection needs equal cutoffs, got {ci} and {cj}"
        )));
    }
    let mut out: Option<MultiModeState> = None;
    for n in 0..=ci {
        let mut bra = vec![C64::default(); ci + 1];
        bra[n] = C64::new(1.0, 0.0);
        let term = state.contract(i, &bra)?.contract(j, &bra)?;
        out = Some(match out {
            None => term,
            Some(acc) => add_states(&acc, &term)?,
        });
    }
    Ok(out.expect("cutoff gives at least one level"))
}

fn add_states(a: &MultiModeState, b: &MultiModeState) -> Result<MultiModeState> {
    MultiModeState::from_parts(
        a.modes().to_vec(),
        a.cutoffs().to_vec(),
        a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x + y).collect(),
    )
}

/// Amplitude scale of the sharp physical EPR projection: `⟨x=0|⟨p=0|U_BS = π^{−1/2} Σ⟨n,n|`.
pub fn epr_sharp_scale() -> f64 {
    PI.powf(-0.5)
}

/// Pads both modes so the balanced splitter cannot overflow, then applies it.
pub(crate) fn epr_interfere(state: &MultiModeState, modes: (Mode, Mode)) -> Result<MultiModeState> {
    let (i, j) = modes;
    let total = state.cutoff_of(i)? + state.cutoff_of(j)?;
    state
        .with_cutoff(i, total)?
        .with_cutoff(j, total)?
        .apply_beam_splitter((i, j), &BeamSplitter::balanced())
}

/// Balanced splitter followed by sharp outcomes `x_i = 0`, `p_j = 0`.
pub fn epr_project_sharp(state: &MultiModeState, modes: (Mode, Mode)) -> Result<MultiModeState> {
    let mixed = epr_interfere(state, modes)?;
    let after_x = project_sharp(&mixed, modes.0, QuadratureKind::Amplitude, 0.0)?;
    project_sharp(&after_x, modes.1, QuadratureKind::Phase, 0.0)
}

/// Balanced splitter on `(i, j)`, then a windowed `x` measurement on `i` and a
/// windowed `p` measurement on `j`.
pub fn epr_project_physical(
    state: &MultiModeState,
    modes: (Mode, Mode),
    window_x: Window,
    window_p: Window,
) -> Result<Collapse> {
    let mixed = epr_interfere(state, modes)?;
    collapse_joint(&mixed, &epr_detectors(modes, window_x, window_p))
}

/// The two detectors of the physical EPR projection on an already-interfered pair.
pub fn epr_detectors(modes: (Mode, Mode), window_x: Window, window_p: Window) -> [Homodyne; 2] {
    [
        Homodyne {
            mode: modes.0,
            kind: QuadratureKind::Amplitude,
            window: window_x,
        },
        Homodyne {
            mode: modes.1,
            kind: QuadratureKind::Phase,
            window: window_p,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::ModeState;
    use approx::assert_abs_diff_eq;

    #[test]
    fn x_overlap_examples() {
        assert_abs_diff_eq!(overlap_x(0, 0.0), PI.powf(-0.25), epsilon = 1e-15);
        assert_abs_diff_eq!(overlap_x(0, 0.0), 0.7511255444649425, epsilon = 1e-15);
        assert_abs_diff_eq!(overlap_x(1, 0.0), 0.0);
        assert_abs_diff_eq!(overlap_x(2, std::f64::consts::FRAC_1_SQRT_2), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn p_overlap_examples() {
        assert_abs_diff_eq!(overlap_p(0, 0.0).re, PI.powf(-0.25), epsilon = 1e-15);
        let p = 0.8;
        let expected = C64::new(0.0, 2f64.sqrt() * p * PI.powf(-0.25) * (-p * p / 2.0).exp());
        assert_abs_diff_eq!((overlap_p(1, p) - expected).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            overlap_p(2, 0.0).re,
            2.0 / (PI.powf(0.25) * 8f64.sqrt()),
            epsilon = 1e-15
        );
        for n in 0..8 {
            assert_abs_diff_eq!(overlap_p(n, 1.3).norm(), overlap_x(n, 1.3).abs(), epsilon = 1e-15);
        }
    }

    #[test]
    fn sharp_projection_factorizes_product_state() {
        let s = MultiModeState::product(&[(Mode(1), &ModeState::vacuum(2)), (Mode(2), &ModeState::vacuum(2))]).unwrap();
        let out = project_sharp(&s, Mode(2), QuadratureKind::Amplitude, 0.0).unwrap();
        assert_eq!(out.modes(), &[Mode(1)]);
        assert_abs_diff_eq!(out.amplitude(&[0]).re, PI.powf(-0.25), epsilon = 1e-15);
        assert_abs_diff_eq!(out.norm_sqr(), PI.powf(-0.5), epsilon = 1e-15);
    }

    #[test]
    fn zero_width_window_has_zero_probability() {
        let s = MultiModeState::single(Mode(1), ModeState::vacuum(1));
        let c = collapse_windowed(&s, Mode(1), QuadratureKind::Amplitude, Window::new(0.0, 0.0).unwrap()).unwrap();
        assert_eq!(c.probability, 0.0);
        assert!(c.conditional().is_err());
    }

    #[test]
    fn window_rejects_negative_width() {
        assert!(Window::new(0.0, -0.1).is_err());
        assert!(Window::with_order(0.0, 0.1, 0).is_err());
        assert!(Acceptance::window(0.0).is_err());
    }

    #[test]
    fn ideal_epr_needs_matching_cutoffs() {
        let s = MultiModeState::product(&[
            (Mode(1), &ModeState::fock(1, 2).unwrap()),
            (Mode(2), &ModeState::fock(1, 1).unwrap()),
        ])
        .unwrap();
        assert!(matches!(
            epr_project_ideal(&s, (Mode(1), Mode(2))),
            Err(SimError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn ideal_epr_on_photon_pair_is_unit_scalar() {
        let s = MultiModeState::product(&[
            (Mode(1), &ModeState::fock(1, 2).unwrap()),
            (Mode(2), &ModeState::fock(1, 2).unwrap()),
        ])
        .unwrap();
        let out = epr_project_ideal(&s, (Mode(1), Mode(2))).unwrap();
        assert!(out.modes().is_empty());
        assert_abs_diff_eq!(out.amplitudes()[0].re, 1.0);
    }
}
