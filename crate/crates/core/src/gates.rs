//! Heralded nonlinear sign gate `c₀|0⟩ + c₁|1⟩ + c₂|2⟩ → c₀|0⟩ + c₁|1⟩ − c₂|2⟩`.
//!
//! The signal meets a single-photon ancilla on a `t_a` splitter, picks up a π
//! phase, and meets a vacuum mode on a `t_b` splitter. Success is heralded by
//! one photon in the ancilla mode and none in the vacuum mode. The vacuum
//! herald is an exact `⟨0|` contraction. The single-photon herald is an EPR
//! projection against a second single photon, sharp or windowed.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Result, SimError};
use crate::fock::{BeamSplitter, Mode, ModeState, MultiModeState};
use crate::measurement::{epr_project_ideal, epr_project_physical, Acceptance, Window};
use crate::protocols::{two_photon_pipeline_averaged, PipelineParams};

const REFERENCE: Mode = Mode(0);
const SIGNAL: Mode = Mode(1);
const ANCILLA: Mode = Mode(2);
const VACUUM: Mode = Mode(3);
const PARTNER: Mode = Mode(4);

/// `t_a² = (3 − √2)/7` and `t_b = t_a/(1 − 2t_a²)`.
pub fn nsg_transmittances() -> (f64, f64) {
    let ta = ((3.0 - 2f64.sqrt()) / 7.0).sqrt();
    (ta, ta / (1.0 - 2.0 * ta * ta))
}

/// Where the two single photons of the gate come from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AncillaSource {
    Ideal,
    /// The averaged output of the two-photon preparation pipeline.
    Extracted(PipelineParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsgParams {
    pub t_a: BeamSplitter,
    pub t_b: BeamSplitter,
    pub ancilla: AncillaSource,
    /// Acceptance of the single-photon herald.
    pub projection: Acceptance,
}

impl NsgParams {
    pub fn new(ancilla: AncillaSource, projection: Acceptance) -> Self {
        let (ta, tb) = nsg_transmittances();
        Self {
            t_a: BeamSplitter::new(ta).expect("t_a in range"),
            t_b: BeamSplitter::new(tb).expect("t_b in range"),
            ancilla,
            projection,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ta = self.t_a.t();
        let denom = 1.0 - 2.0 * ta * ta;
        if !(denom > 0.0) || (self.t_b.t() - ta / denom).abs() > 1e-12 {
            return Err(SimError::InvalidParameter(format!(
                "t_b = {} does not equal t_a/(1 − 2t_a²) for t_a = {ta}",
                self.t_b.t()
            )));
        }
        if let AncillaSource::Extracted(p) = &self.ancilla {
            p.validate()?;
        }
        Ok(())
    }
}

/// `c₂ → −c₂` on a state supported on levels 0..=2.
pub fn nsg_ideal_reference(input: &ModeState) -> Result<ModeState> {
    if input.top_level(1e-12).unwrap_or(0) > 2 {
        return Err(SimError::InvalidParameter(
            "the sign gate acts on levels 0..=2 only".into(),
        ));
    }
    let mut amps = input.with_cutoff(2)?.amplitudes().to_vec();
    amps[2] = -amps[2];
    ModeState::from_amplitudes(amps)
}

/// Ancilla photons as an ensemble `ρ = Σ |v⟩⟨v|` plus the probability of
/// producing one of them.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedAncilla {
    pub members: Vec<ModeState>,
    pub probability: f64,
}

impl PreparedAncilla {
    pub fn prepare(source: &AncillaSource) -> Result<Self> {
        match source {
            AncillaSource::Ideal => Ok(Self {
                members: vec![ModeState::fock(1, 1)?],
                probability: 1.0,
            }),
            AncillaSource::Extracted(p) => {
                let out = two_photon_pipeline_averaged(p)?;
                let members = out
                    .rho
                    .ensemble()
                    .into_iter()
                    .map(|m| m.into_mode_state())
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self {
                    members,
                    probability: out.success_probability,
                })
            }
        }
    }
}

/// Signal and ancilla through both splitters with the vacuum herald applied,
/// the ancilla mode paired with `partner` for the single-photon herald.
fn interfere(
    state: &MultiModeState,
    params: &NsgParams,
    ancilla: &ModeState,
    partner: &ModeState,
) -> Result<MultiModeState> {
    let cs = state.cutoff_of(SIGNAL)? + ancilla.cutoff();
    let vacuum = ModeState::vacuum(cs);
    let mixed = state
        .tensor(ANCILLA, ancilla)?
        .with_cutoff(SIGNAL, cs)?
        .with_cutoff(ANCILLA, cs)?
        .apply_beam_splitter((SIGNAL, ANCILLA), &params.t_a)?
        .apply_phase(SIGNAL, PI)?
        .tensor(VACUUM, &vacuum)?
        .apply_beam_splitter((SIGNAL, VACUUM), &params.t_b)?
        .contract(VACUUM, vacuum.amplitudes())?;
    let pc = cs.max(partner.cutoff());
    mixed
        .tensor(PARTNER, &partner.with_cutoff(pc)?)?
        .with_cutoff(ANCILLA, pc)
}

/// Runs the gate on the signal mode of `state`. Returns the unnormalised
/// heralded operator on the remaining modes.
fn apply_gate(
    state: &MultiModeState,
    params: &NsgParams,
    ancilla: &ModeState,
    partner: &ModeState,
) -> Result<DensityMatrix> {
    let paired = interfere(state, params, ancilla, partner)?;
    match params.projection {
        Acceptance::Sharp => Ok(DensityMatrix::from_pure(&epr_project_ideal(
            &paired,
            (ANCILLA, PARTNER),
        )?)),
        Acceptance::Window { half_width } => Ok(epr_project_physical(
            &paired,
            (ANCILLA, PARTNER),
            Window::new(0.0, half_width)?,
            Window::new(0.0, half_width)?,
        )?
        .unnormalized),
    }
}

fn apply_with_ancillas(
    state: &MultiModeState,
    params: &NsgParams,
    prepared: &PreparedAncilla,
) -> Result<DensityMatrix> {
    let mut acc: Option<DensityMatrix> = None;
    for a in &prepared.members {
        for e in &prepared.members {
            let part = apply_gate(state, params, a, e)?;
            match acc.as_mut() {
                None => acc = Some(part),
                Some(total) => total.add_scaled(&part, 1.0)?,
            }
        }
    }
    acc.ok_or(SimError::ZeroProbability)
}

/// Gate output for a single-mode input.
#[derive(Clone, Debug, PartialEq)]
pub struct NsgOutput {
    /// Normalised output state of the signal.
    pub rho: DensityMatrix,
    /// Gate success probability times the probability of producing both ancillas.
    pub success_probability: f64,
    /// Unnormalised output amplitudes when the heralds are pure projections.
    pub amplitudes: Option<ModeState>,
}

impl NsgOutput {
    /// `⟨ψ|ρ|ψ⟩` with the target padded to the output cutoff.
    pub fn fidelity_with(&self, target: &ModeState) -> Result<f64> {
        let cutoff = self.rho.cutoffs()[0];
        self.rho.fidelity_with_mode(&target.normalize()?.with_cutoff(cutoff)?)
    }
}

pub fn nsg_circuit(input: &ModeState, params: &NsgParams) -> Result<NsgOutput> {
    params.validate()?;
    let prepared = PreparedAncilla::prepare(&params.ancilla)?;
    nsg_circuit_prepared(input, params, &prepared)
}

/// As [`nsg_circuit`] with ancillas prepared once by the caller.
pub fn nsg_circuit_prepared(input: &ModeState, params: &NsgParams, prepared: &PreparedAncilla) -> Result<NsgOutput> {
    if input.top_level(1e-12).unwrap_or(0) > 2 {
        return Err(SimError::InvalidParameter(
            "the sign gate acts on levels 0..=2 only".into(),
        ));
    }
    let state = MultiModeState::single(SIGNAL, input.with_cutoff(2)?);
    let heralded = apply_with_ancillas(&state, params, prepared)?;
    let gate_probability = heralded.trace();
    let amplitudes = if prepared.members.len() == 1 && params.projection == Acceptance::Sharp {
        let a = &prepared.members[0];
        let pure = apply_pure(&state, params, a)?;
        Some(match (input.amplitude(0), pure.amplitude(0)) {
            (c, d) if c.norm() > 1e-12 && d.norm() > 1e-12 => pure.scaled(C64::from_polar(1.0, c.arg() - d.arg())),
            _ => pure,
        })
    } else {
        None
    };
    Ok(NsgOutput {
        rho: heralded.normalized()?,
        success_probability: gate_probability * prepared.probability.powi(2),
        amplitudes,
    })
}

fn apply_pure(state: &MultiModeState, params: &NsgParams, ancilla: &ModeState) -> Result<ModeState> {
    let paired = interfere(state, params, ancilla, ancilla)?;
    epr_project_ideal(&paired, (ANCILLA, PARTNER))?.into_mode_state()
}

/// `(|00⟩ + |11⟩ + |22⟩)/√3` on reference and signal, and its sign-flipped target.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessProbe {
    pub state: MultiModeState,
    pub target: MultiModeState,
}

impl ProcessProbe {
    pub fn new() -> Self {
        let s = 1.0 / 3f64.sqrt();
        let build = |sign: f64| {
            let mut amps = vec![C64::default(); 9];
            amps[0] = C64::new(s, 0.0);
            amps[4] = C64::new(s, 0.0);
            amps[8] = C64::new(sign * s, 0.0);
            MultiModeState::from_parts(vec![REFERENCE, SIGNAL], vec![2, 2], amps).expect("3x3 layout")
        };
        Self {
            state: build(1.0),
            target: build(-1.0),
        }
    }
}

impl Default for ProcessProbe {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessFidelity {
    pub fidelity: f64,
    pub success_probability: f64,
    pub gate_probability: f64,
    pub extraction_probability: f64,
}

/// `⟨Φ'|ρ|Φ'⟩` after the gate acts on the signal arm of the probe.
pub fn nsg_process_fidelity(params: &NsgParams) -> Result<ProcessFidelity> {
    params.validate()?;
    let prepared = PreparedAncilla::prepare(&params.ancilla)?;
    nsg_process_fidelity_prepared(params, &prepared)
}

pub fn nsg_process_fidelity_prepared(params: &NsgParams, prepared: &PreparedAncilla) -> Result<ProcessFidelity> {
    let probe = ProcessProbe::new();
    let heralded = apply_with_ancillas(&probe.state, params, prepared)?;
    let gate_probability = heralded.trace();
    let rho = heralded.normalized()?;
    let cutoff = rho.cutoffs()[1];
    let target = probe.target.with_cutoff(SIGNAL, cutoff)?;
    Ok(ProcessFidelity {
        fidelity: rho.fidelity_with_pure(&target)?,
        success_probability: gate_probability * prepared.probability.powi(2),
        gate_probability,
        extraction_probability: prepared.probability,
    })
}
