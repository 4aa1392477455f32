//! Truncated Fock-space simulation of photonic circuits built from beam
//! splitters, displacements and homodyne measurements, with non-Gaussian
//! ancilla states as the only non-Gaussian ingredient.
//!
//! The crate covers single-photon extraction from finite Fock-superposition
//! resources and a heralded nonlinear sign gate, both under finite homodyne
//! acceptance windows.

// `!(x > 0.0)` is used on purpose so that NaN fails the check too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod fock;
pub mod gates;
pub mod measurement;
pub mod optimize;
pub mod protocols;
pub mod quadrature;
pub mod sweep;

pub use density::{partial_trace, DensityMatrix};
pub use error::{Result, SimError};
pub use fock::{BeamSplitter, Mode, ModeState, MultiModeState};
pub use measurement::{Acceptance, Collapse, Homodyne, QuadratureKind, Window};
