//! Approximate photon subtraction with a vacuum-free ancilla, and the final
//! interference step that cancels the vacuum term of `a₀|0⟩ + a₁|1⟩`.

use std::f64::consts::SQRT_2;

use num_complex::Complex64 as C64;

use super::{herald, Heralded};
use crate::error::{Result, SimError};
use crate::fock::{binomial, BeamSplitter, Mode, ModeState, MultiModeState};
use crate::measurement::{epr_interfere, Acceptance, QuadratureKind};

const SIGNAL: Mode = Mode(1);
const IDLER: Mode = Mode(2);
const ANCILLA: Mode = Mode(4);

fn subtraction_inputs(chi: &ModeState, phi: &ModeState) -> Result<usize> {
    let m = chi.top_level(0.0).unwrap_or(0);
    if m == 0 {
        return Err(SimError::InvalidParameter(
            "photon subtraction needs a state with at least one photon".into(),
        ));
    }
    let scale = phi.norm_sqr().sqrt();
    if phi.amplitude(0).norm() > 1e-10 * scale {
        return Err(SimError::InvalidParameter(
            "ancilla must have no vacuum component".into(),
        ));
    }
    Ok(m)
}

/// `b'_m = Σ_{k=m+1}^{M} d_{k−m} b_k √C(k,m) tᵐ r^{k−m}`, unnormalised, cutoff `M − 1`.
pub fn photon_subtract_analytic(chi: &ModeState, phi: &ModeState, bs: &BeamSplitter) -> Result<ModeState> {
    let m_top = subtraction_inputs(chi, phi)?;
    let (t, r) = (bs.t(), bs.r());
    let out = (0..m_top)
        .map(|m| {
            (m + 1..=m_top)
                .map(|k| {
                    phi.amplitude(k - m)
                        * chi.amplitude(k)
                        * binomial(k, m).sqrt()
                        * t.powi(m as i32)
                        * r.powi((k - m) as i32)
                })
                .sum::<C64>()
        })
        .collect();
    ModeState::from_amplitudes(out)
}

fn subtraction_circuit(chi: &ModeState, phi: &ModeState, bs: &BeamSplitter) -> Result<MultiModeState> {
    let m_top = subtraction_inputs(chi, phi)?;
    let chi = chi.with_cutoff(m_top)?;
    MultiModeState::product(&[(SIGNAL, &chi), (IDLER, &ModeState::vacuum(m_top)), (ANCILLA, phi)])?
        .apply_beam_splitter((SIGNAL, IDLER), bs)
}

/// Full three-mode simulation with sharp EPR outcomes: chi and vacuum through
/// the splitter, then the reflected mode projected jointly with the ancilla.
/// Unnormalised; equals the analytic coefficients times `π^{−1/2}`.
pub fn photon_subtract_sharp(chi: &ModeState, phi: &ModeState, bs: &BeamSplitter) -> Result<ModeState> {
    let state = subtraction_circuit(chi, phi, bs)?;
    crate::measurement::epr_project_sharp(&state, (IDLER, ANCILLA))?.into_mode_state()
}

/// As [`photon_subtract_sharp`] but with the configured acceptance on both
/// EPR detectors. The result lives on mode 1.
pub fn photon_subtract_simulated(
    chi: &ModeState,
    phi: &ModeState,
    bs: &BeamSplitter,
    acceptance: Acceptance,
) -> Result<Heralded> {
    let state = subtraction_circuit(chi, phi, bs)?;
    let mixed = epr_interfere(&state, (IDLER, ANCILLA))?;
    let unnormalized = herald(
        &mixed,
        &[
            (IDLER, QuadratureKind::Amplitude, 0.0),
            (ANCILLA, QuadratureKind::Phase, 0.0),
        ],
        acceptance,
    )?;
    Ok(Heralded { unnormalized })
}

/// Rotates `a₀|0⟩ + a₁|1⟩` (plus any higher levels) by a global phase and a
/// phase shift so that `a₀` and `a₁` become real and non-negative.
pub fn align_phases(psi: &ModeState) -> ModeState {
    let (a0, a1) = (psi.amplitude(0), psi.amplitude(1));
    let global = if a0.norm() > 0.0 { -a0.arg() } else { -a1.arg() };
    let shift = if a0.norm() > 0.0 && a1.norm() > 0.0 {
        a0.arg() - a1.arg()
    } else {
        0.0
    };
    psi.apply_phase(shift).scaled(C64::from_polar(1.0, global))
}

/// Outcome `x = −a₀/(√2 r a₁)` at which the vacuum term interferes away.
pub fn vacuum_cancellation_target(a0: f64, a1: f64, bs: &BeamSplitter) -> Result<f64> {
    if a1 == 0.0 {
        return Err(SimError::InvalidParameter(
            "vacuum cancellation needs a nonzero single-photon amplitude".into(),
        ));
    }
    if bs.r() == 0.0 {
        return Err(SimError::InvalidParameter(
            "vacuum cancellation needs a splitter with r > 0".into(),
        ));
    }
    Ok(-a0 / (SQRT_2 * bs.r() * a1))
}

/// `psi1` and vacuum through the splitter, sharp `x` on the second port.
/// Returns the unnormalised state `(a₀ + √2 x r a₁)|0⟩ + t a₁|1⟩` times `⟨x|0⟩`.
pub fn final_vacuum_cancellation(psi1: &ModeState, bs: &BeamSplitter, x: f64) -> Result<ModeState> {
    let (a0, a1) = (psi1.amplitude(0), psi1.amplitude(1));
    if a1.norm() == 0.0 {
        return Err(SimError::InvalidParameter(
            "vacuum cancellation needs a nonzero single-photon amplitude".into(),
        ));
    }
    if a0.im.abs() > 1e-12 || a1.im.abs() > 1e-12 {
        return Err(SimError::InvalidParameter(
            "amplitudes must be real; align phases first".into(),
        ));
    }
    let cutoff = psi1.cutoff().max(1);
    let state = MultiModeState::product(&[
        (Mode(1), &psi1.with_cutoff(cutoff)?),
        (Mode(5), &ModeState::vacuum(cutoff)),
    ])?
    .apply_beam_splitter((Mode(1), Mode(5)), bs)?;
    crate::measurement::project_sharp(&state, Mode(5), QuadratureKind::Amplitude, x)?.into_mode_state()
}
