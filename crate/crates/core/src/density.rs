//! Density matrices over labelled truncated modes.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Result, SimError};
use crate::fock::{Mode, ModeState, MultiModeState};

/// Operator on the tensor product of the listed modes, basis ordered row-major
/// with the first mode slowest (the same layout as [`MultiModeState`]).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    modes: Vec<Mode>,
    cutoffs: Vec<usize>,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(modes: Vec<Mode>, cutoffs: Vec<usize>, entries: DMatrix<C64>) -> Result<Self> {
        let dim: usize = cutoffs.iter().map(|c| c + 1).product();
        if modes.len() != cutoffs.len() || entries.nrows() != dim || entries.ncols() != dim {
            return Err(SimError::DimensionMismatch(format!(
                "{}x{} matrix for a space of dimension {dim}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self {
            modes,
            cutoffs,
            entries,
        })
    }

    pub fn zeros(modes: Vec<Mode>, cutoffs: Vec<usize>) -> Self {
        let dim: usize = cutoffs.iter().map(|c| c + 1).product();
        Self {
            modes,
            cutoffs,
            entries: DMatrix::zeros(dim, dim),
        }
    }

    /// `|ψ⟩⟨ψ|` without normalisation.
    pub fn from_pure(state: &MultiModeState) -> Self {
        let mut rho = Self::zeros(state.modes().to_vec(), state.cutoffs().to_vec());
        rho.add_outer(state.amplitudes(), 1.0);
        rho
    }

    /// Single-mode `|ψ⟩⟨ψ|` on `mode`.
    pub fn from_mode_state(mode: Mode, state: &ModeState) -> Self {
        Self::from_pure(&MultiModeState::single(mode, state.clone()))
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Adds `weight · |v⟩⟨v|`.
    pub(crate) fn add_outer(&mut self, v: &[C64], weight: f64) {
        let n = self.dim();
        debug_assert_eq!(v.len(), n);
        for (b, vb) in v.iter().enumerate() {
            let wb = vb.conj() * weight;
            if wb == C64::default() {
                continue;
            }
            let mut col = self.entries.column_mut(b);
            for (a, va) in v.iter().enumerate() {
                col[a] += va * wb;
            }
        }
    }

    pub(crate) fn add_scaled(&mut self, other: &DensityMatrix, weight: f64) -> Result<()> {
        if self.modes != other.modes || self.cutoffs != other.cutoffs {
            return Err(SimError::DimensionMismatch(
                "density matrices on different spaces".into(),
            ));
        }
        self.entries += &other.entries * C64::new(weight, 0.0);
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            modes: self.modes.clone(),
            cutoffs: self.cutoffs.clone(),
            entries: &self.entries * C64::new(factor, 0.0),
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 0.0 || !tr.is_finite() {
            return Err(SimError::ZeroProbability);
        }
        Ok(self.scaled(1.0 / tr))
    }

    /// Largest entry of `ρ − ρ†`.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.entries - self.entries.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of the hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Diagonal element `⟨n|ρ|n⟩` of a single-mode matrix.
    pub fn population(&self, n: usize) -> f64 {
        if n < self.dim() {
            self.entries[(n, n)].re
        } else {
            0.0
        }
    }

    /// `⟨ψ|ρ|ψ⟩` for a target on the same modes and cutoffs.
    pub fn fidelity_with_pure(&self, target: &MultiModeState) -> Result<f64> {
        if target.modes() != self.modes.as_slice() || target.cutoffs() != self.cutoffs.as_slice() {
            return Err(SimError::DimensionMismatch(format!(
                "target on {:?} with cutoffs {:?}, matrix on {:?} with cutoffs {:?}",
                target.modes(),
                target.cutoffs(),
                self.modes,
                self.cutoffs
            )));
        }
        let v = target.amplitudes();
        let mut acc = C64::default();
        for (b, vb) in v.iter().enumerate() {
            if *vb == C64::default() {
                continue;
            }
            for (a, va) in v.iter().enumerate() {
                acc += va.conj() * self.entries[(a, b)] * vb;
            }
        }
        Ok(acc.re)
    }

    /// `⟨ψ|ρ|ψ⟩` for a single-mode matrix.
    pub fn fidelity_with_mode(&self, target: &ModeState) -> Result<f64> {
        if self.modes.len() != 1 {
            return Err(SimError::DimensionMismatch(format!(
                "matrix spans {} modes, target spans one",
                self.modes.len()
            )));
        }
        self.fidelity_with_pure(&MultiModeState::single(self.modes[0], target.clone()))
    }

    /// Traces out every mode not in `keep`; the result lists modes in `keep` order.
    pub fn partial_trace(&self, keep: &[Mode]) -> Result<DensityMatrix> {
        let split = IndexSplit::new(&self.modes, &self.cutoffs, keep)?;
        let mut out = DMatrix::<C64>::zeros(split.keep_dim, split.keep_dim);
        for group in &split.by_env {
            for &(ka, fa) in group {
                for &(kb, fb) in group {
                    out[(ka, kb)] += self.entries[(fa, fb)];
                }
            }
        }
        Ok(DensityMatrix {
            modes: keep.to_vec(),
            cutoffs: split.keep_cutoffs,
            entries: out,
        })
    }

    /// Trace distance `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.modes != other.modes || self.cutoffs != other.cutoffs {
            return Err(SimError::DimensionMismatch(
                "density matrices on different spaces".into(),
            ));
        }
        let diff = DensityMatrix {
            modes: self.modes.clone(),
            cutoffs: self.cutoffs.clone(),
            entries: &self.entries - &other.entries,
        };
        Ok(0.5 * diff.eigenvalues().iter().map(|e| e.abs()).sum::<f64>())
    }

    /// Decomposition `ρ = Σ |v_k⟩⟨v_k|` into unnormalised eigenvectors,
    /// dropping eigenvalues below `1e-15` of the trace.
    pub fn ensemble(&self) -> Vec<MultiModeState> {
        let h = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        let scale = self.trace().abs().max(f64::MIN_POSITIVE);
        (0..eig.eigenvalues.len())
            .filter(|&k| eig.eigenvalues[k] > 1e-15 * scale)
            .map(|k| {
                let s = eig.eigenvalues[k].sqrt();
                let v = eig.eigenvectors.column(k).iter().map(|a| a * s).collect();
                MultiModeState::from_parts(self.modes.clone(), self.cutoffs.clone(), v)
                    .expect("eigenvector matches the matrix layout")
            })
            .collect()
    }

    /// Pure state on these modes plus `env` whose reduction is this matrix.
    /// Keeps the trace, so an unnormalised matrix gives an unnormalised state.
    pub fn purify(&self, env: Mode) -> Result<MultiModeState> {
        if self.modes.contains(&env) {
            return Err(SimError::DuplicateMode(env));
        }
        let members = self.ensemble();
        if members.is_empty() {
            return Err(SimError::ZeroProbability);
        }
        let dim = self.dim();
        let rank = members.len();
        let mut amplitudes = vec![C64::default(); dim * rank];
        for (e, v) in members.iter().enumerate() {
            for (a, amp) in v.amplitudes().iter().enumerate() {
                amplitudes[a * rank + e] = *amp;
            }
        }
        let mut modes = self.modes.clone();
        modes.push(env);
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.push(rank - 1);
        MultiModeState::from_parts(modes, cutoffs, amplitudes)
    }
}

/// Reduced density matrix of a pure state on the modes in `keep`.
pub fn partial_trace(state: &MultiModeState, keep: &[Mode]) -> Result<DensityMatrix> {
    let split = IndexSplit::new(state.modes(), state.cutoffs(), keep)?;
    let amps = state.amplitudes();
    let mut out = DMatrix::<C64>::zeros(split.keep_dim, split.keep_dim);
    for group in &split.by_env {
        for &(kb, fb) in group {
            let vb = amps[fb].conj();
            if vb == C64::default() {
                continue;
            }
            for &(ka, fa) in group {
                out[(ka, kb)] += amps[fa] * vb;
            }
        }
    }
    Ok(DensityMatrix {
        modes: keep.to_vec(),
        cutoffs: split.keep_cutoffs,
        entries: out,
    })
}

/// Full indices grouped by their traced-out part, each tagged with its kept index.
struct IndexSplit {
    keep_dim: usize,
    keep_cutoffs: Vec<usize>,
    by_env: Vec<Vec<(usize, usize)>>,
}

impl IndexSplit {
    fn new(modes: &[Mode], cutoffs: &[usize], keep: &[Mode]) -> Result<Self> {
        if keep.is_empty() {
            return Err(SimError::EmptyKeep);
        }
        let mut keep_axes = Vec::with_capacity(keep.len());
        for (k, m) in keep.iter().enumerate() {
            if keep[..k].contains(m) {
                return Err(SimError::DuplicateMode(*m));
            }
            keep_axes.push(modes.iter().position(|x| x == m).ok_or(SimError::UnknownMode(*m))?);
        }
        let env_axes: Vec<usize> = (0..modes.len()).filter(|a| !keep_axes.contains(a)).collect();
        let dims: Vec<usize> = cutoffs.iter().map(|c| c + 1).collect();
        let total: usize = dims.iter().product();
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let flat = |idx: usize, axes: &[usize]| {
            axes.iter()
                .fold(0, |acc, &a| acc * dims[a] + (idx / strides[a]) % dims[a])
        };
        let env_dim: usize = env_axes.iter().map(|&a| dims[a]).product();
        let mut by_env = vec![Vec::new(); env_dim];
        for idx in 0..total {
            by_env[flat(idx, &env_axes)].push((flat(idx, &keep_axes), idx));
        }
        Ok(Self {
            keep_dim: keep_axes.iter().map(|&a| dims[a]).product(),
            keep_cutoffs: keep_axes.iter().map(|&a| cutoffs[a]).collect(),
            by_env,
        })
    }
}
