//! Truncated Fock-space states and the Gaussian unitaries acting on them.
//!
//! Beam-splitter convention: for an ordered pair of modes `(i, j)` the
//! creation operators map as
//!
//! ```text
//! a_i† → t a_i† + r a_j†
//! a_j† → t a_j† − r a_i†
//! ```
//!
//! so `|N⟩_i|0⟩_j → Σ_k √C(N,k) t^k r^{N−k} |k⟩_i|N−k⟩_j` with all
//! coefficients positive. The first mode of the pair is called the
//! transmitted port throughout the crate.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Largest fraction of the squared norm an operation may drop at the cutoff.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Extra levels examined past a displacement's spread when checking for leakage.
pub const DISPLACEMENT_HEADROOM: usize = 8;

/// Label of an optical mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode(pub usize);

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mode {}", self.0)
    }
}

/// Real beam splitter with amplitude transmittance `t` and reflectance `r = √(1−t²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitter {
    t: f64,
    r: f64,
}

impl BeamSplitter {
    pub fn new(t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) || !t.is_finite() {
            return Err(SimError::InvalidParameter(format!("transmittance {t} outside [0, 1]")));
        }
        Ok(Self {
            t,
            r: (1.0 - t * t).max(0.0).sqrt(),
        })
    }

    pub fn balanced() -> Self {
        Self {
            t: std::f64::consts::FRAC_1_SQRT_2,
            r: std::f64::consts::FRAC_1_SQRT_2,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Matrix of the splitter on the block of total photon number `total`:
    /// entry `(k, m)` is `⟨k, total−k| U |m, total−m⟩`.
    pub fn block(&self, total: usize) -> DMatrix<f64> {
        let (t, r) = (self.t, self.r);
        let fact = factorials(total);
        DMatrix::from_fn(total + 1, total + 1, |k, m| {
            let n = total - m;
            let mut sum = 0.0;
            // p photons of the first input stay, q photons of the second cross over
            for p in 0..=m.min(k) {
                let q = k - p;
                if q > n {
                    continue;
                }
                let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                sum += sign * binomial(m, p) * binomial(n, q) * powi(t, p + n - q) * powi(r, m - p + q);
            }
            sum * (fact[k] * fact[total - k] / (fact[m] * fact[n])).sqrt()
        })
    }
}

fn powi(x: f64, n: usize) -> f64 {
    x.powi(n as i32)
}

pub(crate) fn factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    for k in 1..=n {
        out.push(out[k - 1] * k as f64);
    }
    out
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Pure state of a single mode, amplitudes indexed by photon number `0..=cutoff`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    amplitudes: Vec<C64>,
}

impl ModeState {
    pub fn fock(n: usize, cutoff: usize) -> Result<Self> {
        if n > cutoff {
            return Err(SimError::Cutoff { n, cutoff });
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); cutoff + 1];
        amplitudes[n] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn vacuum(cutoff: usize) -> Self {
        Self::fock(0, cutoff).expect("vacuum fits any cutoff")
    }

    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(SimError::DimensionMismatch("a mode needs at least one level".into()));
        }
        Ok(Self { amplitudes })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amplitudes.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn cutoff(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    /// Amplitude at photon number `n`; zero above the cutoff.
    pub fn amplitude(&self, n: usize) -> C64 {
        self.amplitudes.get(n).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(SimError::ZeroProbability);
        }
        Ok(Self {
            amplitudes: self.amplitudes.iter().map(|a| a / norm).collect(),
        })
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    /// Highest photon number whose amplitude exceeds `eps` in modulus.
    pub fn top_level(&self, eps: f64) -> Option<usize> {
        self.amplitudes.iter().rposition(|a| a.norm() > eps)
    }

    /// `⟨self|other⟩` over the common levels.
    pub fn inner(&self, other: &ModeState) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Pads with zeros or truncates; truncation fails if it drops more than the tail tolerance.
    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        let mut amplitudes = self.amplitudes.clone();
        if cutoff + 1 < amplitudes.len() {
            let lost: f64 = amplitudes[cutoff + 1..].iter().map(|a| a.norm_sqr()).sum();
            let total = self.norm_sqr();
            if lost > TAIL_TOLERANCE * total {
                return Err(SimError::TruncationLoss {
                    mode: Mode(0),
                    lost: lost / total,
                    tolerance: TAIL_TOLERANCE,
                    suggested: self.top_level(0.0).unwrap_or(0),
                });
            }
        }
        amplitudes.resize(cutoff + 1, C64::default());
        Ok(Self { amplitudes })
    }

    pub fn apply_displacement(&self, alpha: C64) -> Result<Self> {
        MultiModeState::single(Mode(0), self.clone())
            .apply_displacement(Mode(0), alpha)?
            .into_mode_state()
    }

    pub fn apply_phase(&self, theta: f64) -> Self {
        Self {
            amplitudes: self
                .amplitudes
                .iter()
                .enumerate()
                .map(|(n, a)| a * C64::from_polar(1.0, n as f64 * theta))
                .collect(),
        }
    }
}

/// Matrix elements `⟨m|D(α)|n⟩` for `m ≤ rows`, `n ≤ cols` in the untruncated
/// space, from `√(n!/m!) α^{m−n} e^{−|α|²/2} L_n^{(m−n)}(|α|²)` for `m ≥ n` and
/// `⟨m|D(α)|n⟩ = ⟨n|D(−α)|m⟩*` otherwise.
pub fn displacement_matrix(alpha: C64, rows: usize, cols: usize) -> DMatrix<C64> {
    let mut d = DMatrix::<C64>::zeros(rows + 1, cols + 1);
    if alpha == C64::default() {
        for k in 0..=rows.min(cols) {
            d[(k, k)] = C64::new(1.0, 0.0);
        }
        return d;
    }
    let top = rows.max(cols);
    let mut ln_fact = vec![0.0; top + 1];
    for k in 1..=top {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let x = alpha.norm_sqr();
    let (ln_a, phase) = (alpha.norm().ln(), alpha.arg());
    // ⟨hi|D(β)|lo⟩ with hi ≥ lo, where β = ±α
    let element = |hi: usize, lo: usize, sign: f64| -> C64 {
        let k = hi - lo;
        let kf = k as f64;
        let (mut prev, mut cur) = (1.0, 1.0 + kf - x);
        let laguerre = if lo == 0 {
            1.0
        } else {
            for j in 1..lo {
                let jf = j as f64;
                let next = ((2.0 * jf + 1.0 + kf - x) * cur - (jf + kf) * prev) / (jf + 1.0);
                prev = cur;
                cur = next;
            }
            cur
        };
        let magnitude = (0.5 * (ln_fact[lo] - ln_fact[hi]) + kf * ln_a - 0.5 * x).exp();
        let beta_phase = if sign > 0.0 {
            phase
        } else {
            phase + std::f64::consts::PI
        };
        C64::from_polar(magnitude * laguerre, kf * beta_phase)
    };
    for m in 0..=rows {
        for n in 0..=cols {
            d[(m, n)] = if m >= n {
                element(m, n, 1.0)
            } else {
                element(n, m, -1.0).conj()
            };
        }
    }
    d
}

/// Pure state on several labelled modes, stored row-major with the first mode
/// as the slowest axis. A state with no modes is a scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiModeState {
    modes: Vec<Mode>,
    cutoffs: Vec<usize>,
    amplitudes: Vec<C64>,
}

impl MultiModeState {
    pub fn scalar(value: C64) -> Self {
        Self {
            modes: Vec::new(),
            cutoffs: Vec::new(),
            amplitudes: vec![value],
        }
    }

    pub fn single(mode: Mode, state: ModeState) -> Self {
        Self {
            modes: vec![mode],
            cutoffs: vec![state.cutoff()],
            amplitudes: state.amplitudes,
        }
    }

    /// Product state of the given single-mode factors, in order.
    pub fn product(factors: &[(Mode, &ModeState)]) -> Result<Self> {
        factors
            .iter()
            .try_fold(Self::scalar(C64::new(1.0, 0.0)), |acc, (mode, state)| {
                acc.tensor(*mode, state)
            })
    }

    /// Builds a state from raw row-major amplitudes.
    pub fn from_parts(modes: Vec<Mode>, cutoffs: Vec<usize>, amplitudes: Vec<C64>) -> Result<Self> {
        if modes.len() != cutoffs.len() {
            return Err(SimError::DimensionMismatch("one cutoff per mode required".into()));
        }
        let len: usize = cutoffs.iter().map(|c| c + 1).product();
        if len != amplitudes.len() {
            return Err(SimError::DimensionMismatch(format!(
                "{} amplitudes for a tensor of size {len}",
                amplitudes.len()
            )));
        }
        for (k, m) in modes.iter().enumerate() {
            if modes[..k].contains(m) {
                return Err(SimError::DuplicateMode(*m));
            }
        }
        Ok(Self {
            modes,
            cutoffs,
            amplitudes,
        })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn cutoff_of(&self, mode: Mode) -> Result<usize> {
        Ok(self.cutoffs[self.axis(mode)?])
    }

    pub fn axis(&self, mode: Mode) -> Result<usize> {
        self.modes
            .iter()
            .position(|&m| m == mode)
            .ok_or(SimError::UnknownMode(mode))
    }

    pub(crate) fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.modes.len()];
        for k in (0..self.modes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * (self.cutoffs[k + 1] + 1);
        }
        strides
    }

    pub fn amplitude(&self, occupation: &[usize]) -> C64 {
        if occupation.len() != self.modes.len() || occupation.iter().zip(&self.cutoffs).any(|(n, c)| n > c) {
            return C64::default();
        }
        let index: usize = occupation.iter().zip(self.strides()).map(|(n, s)| n * s).sum();
        self.amplitudes[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(SimError::ZeroProbability);
        }
        Ok(self.scaled(C64::new(1.0 / norm, 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            modes: self.modes.clone(),
            cutoffs: self.cutoffs.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    /// Appends `mode` holding `state` as the fastest axis.
    pub fn tensor(&self, mode: Mode, state: &ModeState) -> Result<Self> {
        if self.modes.contains(&mode) {
            return Err(SimError::DuplicateMode(mode));
        }
        let mut modes = self.modes.clone();
        modes.push(mode);
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.push(state.cutoff());
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| state.amplitudes().iter().map(move |b| a * b))
            .collect();
        Ok(Self {
            modes,
            cutoffs,
            amplitudes,
        })
    }

    /// Contracts `mode` with the bra whose components are `bra[n] = ⟨φ|n⟩`,
    /// removing the mode. Components beyond `bra.len()` are treated as zero.
    pub fn contract(&self, mode: Mode, bra: &[C64]) -> Result<Self> {
        let axis = self.axis(mode)?;
        let strides = self.strides();
        let (stride, dim) = (strides[axis], self.cutoffs[axis] + 1);
        let outer = self.amplitudes.len() / (stride * dim);
        let mut out = Vec::with_capacity(outer * stride);
        for o in 0..outer {
            let base = o * stride * dim;
            for inner in 0..stride {
                let mut acc = C64::default();
                for (n, b) in bra.iter().take(dim).enumerate() {
                    acc += b * self.amplitudes[base + n * stride + inner];
                }
                out.push(acc);
            }
        }
        let mut modes = self.modes.clone();
        modes.remove(axis);
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.remove(axis);
        Ok(Self {
            modes,
            cutoffs,
            amplitudes: out,
        })
    }

    /// The single-mode state of a one-mode tensor.
    pub fn into_mode_state(self) -> Result<ModeState> {
        if self.modes.len() != 1 {
            return Err(SimError::DimensionMismatch(format!(
                "expected one mode, found {}",
                self.modes.len()
            )));
        }
        ModeState::from_amplitudes(self.amplitudes)
    }

    /// Changes the cutoff of `mode`, failing if more than the tail tolerance is dropped.
    pub fn with_cutoff(&self, mode: Mode, cutoff: usize) -> Result<Self> {
        let axis = self.axis(mode)?;
        let old = self.cutoffs[axis];
        let mut cutoffs = self.cutoffs.clone();
        cutoffs[axis] = cutoff;
        let mut out = Self {
            modes: self.modes.clone(),
            cutoffs,
            amplitudes: Vec::new(),
        };
        let new_strides = {
            out.amplitudes = vec![C64::default(); out.cutoffs.iter().map(|c| c + 1).product()];
            out.strides()
        };
        let old_strides = self.strides();
        let mut lost = 0.0;
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let n = (idx / old_strides[axis]) % (old + 1);
            if n > cutoff {
                lost += a.norm_sqr();
                continue;
            }
            let target: usize = (0..self.modes.len())
                .map(|k| ((idx / old_strides[k]) % (self.cutoffs[k] + 1)) * new_strides[k])
                .sum();
            out.amplitudes[target] = *a;
        }
        let total = self.norm_sqr();
        if total > 0.0 && lost > TAIL_TOLERANCE * total {
            return Err(SimError::TruncationLoss {
                mode,
                lost: lost / total,
                tolerance: TAIL_TOLERANCE,
                suggested: old,
            });
        }
        Ok(out)
    }

    /// Probability of each total photon number.
    pub fn photon_number_distribution(&self) -> Vec<f64> {
        let strides = self.strides();
        let max: usize = self.cutoffs.iter().sum();
        let mut dist = vec![0.0; max + 1];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let total: usize = (0..self.modes.len())
                .map(|k| (idx / strides[k]) % (self.cutoffs[k] + 1))
                .sum();
            dist[total] += a.norm_sqr();
        }
        dist
    }

    /// Applies the beam splitter to the ordered pair `(i, j)`; `i` is the transmitted port.
    pub fn apply_beam_splitter(&self, modes: (Mode, Mode), bs: &BeamSplitter) -> Result<Self> {
        let (mi, mj) = modes;
        if mi == mj {
            return Err(SimError::InvalidParameter(
                "beam splitter needs two distinct modes".into(),
            ));
        }
        let (ai, aj) = (self.axis(mi)?, self.axis(mj)?);
        let (ci, cj) = (self.cutoffs[ai], self.cutoffs[aj]);
        let strides = self.strides();
        let (si, sj) = (strides[ai], strides[aj]);
        let blocks: Vec<DMatrix<f64>> = (0..=ci + cj).map(|n| bs.block(n)).collect();

        let mut out = vec![C64::default(); self.amplitudes.len()];
        let mut lost = 0.0;
        let mut lost_i = 0usize;
        let mut lost_j = 0usize;
        for base in 0..self.amplitudes.len() {
            if (base / si) % (ci + 1) != 0 || (base / sj) % (cj + 1) != 0 {
                continue;
            }
            for (total, block) in blocks.iter().enumerate() {
                let m_lo = total.saturating_sub(cj);
                let m_hi = total.min(ci);
                if m_lo > m_hi {
                    continue;
                }
                for k in 0..=total {
                    let mut acc = C64::default();
                    for m in m_lo..=m_hi {
                        let amp = self.amplitudes[base + m * si + (total - m) * sj];
                        acc += amp * block[(k, m)];
                    }
                    if k <= ci && total - k <= cj {
                        out[base + k * si + (total - k) * sj] = acc;
                    } else {
                        let p = acc.norm_sqr();
                        if p > 0.0 {
                            lost += p;
                            lost_i = lost_i.max(k);
                            lost_j = lost_j.max(total - k);
                        }
                    }
                }
            }
        }
        let norm = self.norm_sqr();
        if norm > 0.0 && lost > TAIL_TOLERANCE * norm {
            let (mode, suggested) = if lost_i > ci { (mi, lost_i) } else { (mj, lost_j) };
            return Err(SimError::TruncationLoss {
                mode,
                lost: lost / norm,
                tolerance: TAIL_TOLERANCE,
                suggested,
            });
        }
        Ok(Self {
            modes: self.modes.clone(),
            cutoffs: self.cutoffs.clone(),
            amplitudes: out,
        })
    }

    /// Applies a single-mode operator given by its full matrix `op[(out, in)]`,
    /// where `op` may have more rows than the cutoff; rows beyond it count as lost norm.
    fn apply_single(&self, mode: Mode, op: &DMatrix<C64>) -> Result<(Self, f64)> {
        let axis = self.axis(mode)?;
        let c = self.cutoffs[axis];
        let stride = self.strides()[axis];
        let mut out = vec![C64::default(); self.amplitudes.len()];
        let mut lost = 0.0;
        let mut fiber = vec![C64::default(); c + 1];
        for base in 0..self.amplitudes.len() {
            if !(base / stride).is_multiple_of(c + 1) {
                continue;
            }
            for (n, f) in fiber.iter_mut().enumerate() {
                *f = self.amplitudes[base + n * stride];
            }
            for m in 0..op.nrows() {
                let acc: C64 = fiber.iter().enumerate().map(|(n, f)| op[(m, n)] * f).sum();
                if m <= c {
                    out[base + m * stride] = acc;
                } else {
                    lost += acc.norm_sqr();
                }
            }
        }
        Ok((
            Self {
                modes: self.modes.clone(),
                cutoffs: self.cutoffs.clone(),
                amplitudes: out,
            },
            lost,
        ))
    }

    /// Applies `D(α)` to `mode`, keeping its cutoff. Fails with a suggested
    /// cutoff when the displaced state leaks more than the tail tolerance.
    pub fn apply_displacement(&self, mode: Mode, alpha: C64) -> Result<Self> {
        let c = self.cutoff_of(mode)?;
        if alpha == C64::default() {
            return Ok(self.clone());
        }
        let a = alpha.norm();
        let probe_rows = c + (a * a + 10.0 * a).ceil() as usize + 2 * DISPLACEMENT_HEADROOM;
        let op = displacement_matrix(alpha, probe_rows, c);
        let (out, lost) = self.apply_single(mode, &op)?;
        let norm = self.norm_sqr();
        if norm > 0.0 && lost > TAIL_TOLERANCE * norm {
            let suggested = suggest_cutoff(self, mode, &op, norm)?;
            return Err(SimError::TruncationLoss {
                mode,
                lost: lost / norm,
                tolerance: TAIL_TOLERANCE,
                suggested,
            });
        }
        Ok(out)
    }

    /// Multiplies the amplitude at photon number `n` of `mode` by `e^{inθ}`.
    pub fn apply_phase(&self, mode: Mode, theta: f64) -> Result<Self> {
        let axis = self.axis(mode)?;
        let c = self.cutoffs[axis];
        let stride = self.strides()[axis];
        let phases: Vec<C64> = (0..=c).map(|n| C64::from_polar(1.0, n as f64 * theta)).collect();
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(idx, a)| a * phases[(idx / stride) % (c + 1)])
            .collect();
        Ok(Self {
            modes: self.modes.clone(),
            cutoffs: self.cutoffs.clone(),
            amplitudes,
        })
    }
}

/// Smallest cutoff that would have kept the displaced state's tail within tolerance.
fn suggest_cutoff(state: &MultiModeState, mode: Mode, op: &DMatrix<C64>, norm: f64) -> Result<usize> {
    let axis = state.axis(mode)?;
    let c = state.cutoffs[axis];
    let stride = state.strides()[axis];
    let mut weight = vec![0.0; op.nrows()];
    for base in 0..state.amplitudes.len() {
        if !(base / stride).is_multiple_of(c + 1) {
            continue;
        }
        for (m, w) in weight.iter_mut().enumerate() {
            let acc: C64 = (0..=c).map(|n| op[(m, n)] * state.amplitudes[base + n * stride]).sum();
            *w += acc.norm_sqr();
        }
    }
    let mut tail: f64 = weight.iter().sum();
    for (m, w) in weight.iter().enumerate() {
        tail -= w;
        if tail <= TAIL_TOLERANCE * norm {
            return Ok(m);
        }
    }
    Ok(op.nrows())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn fock_basis_vectors() {
        assert_eq!(
            ModeState::fock(0, 4).unwrap().amplitudes(),
            &[c(1.0), c(0.0), c(0.0), c(0.0), c(0.0)]
        );
        assert_eq!(
            ModeState::fock(2, 4).unwrap().amplitudes(),
            &[c(0.0), c(0.0), c(1.0), c(0.0), c(0.0)]
        );
        assert_eq!(ModeState::fock(5, 4), Err(SimError::Cutoff { n: 5, cutoff: 4 }));
    }

    #[test]
    fn normalize_gives_unit_norm() {
        let s = ModeState::from_real(&[3.0, 4.0, 0.0]).unwrap().normalize().unwrap();
        assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-12);
        assert_eq!(
            ModeState::from_real(&[0.0, 0.0]).unwrap().normalize(),
            Err(SimError::ZeroProbability)
        );
    }

    #[test]
    fn single_photon_splits_linearly() {
        let bs = BeamSplitter::new(0.3).unwrap();
        let s = MultiModeState::product(&[
            (Mode(1), &ModeState::fock(1, 1).unwrap()),
            (Mode(2), &ModeState::vacuum(1)),
        ])
        .unwrap()
        .apply_beam_splitter((Mode(1), Mode(2)), &bs)
        .unwrap();
        assert_abs_diff_eq!(s.amplitude(&[1, 0]).re, 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(s.amplitude(&[0, 1]).re, bs.r(), epsilon = 1e-14);
        // second port picks up the minus sign
        let s = MultiModeState::product(&[
            (Mode(1), &ModeState::vacuum(1)),
            (Mode(2), &ModeState::fock(1, 1).unwrap()),
        ])
        .unwrap()
        .apply_beam_splitter((Mode(1), Mode(2)), &bs)
        .unwrap();
        assert_abs_diff_eq!(s.amplitude(&[0, 1]).re, 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(s.amplitude(&[1, 0]).re, -bs.r(), epsilon = 1e-14);
    }

    #[test]
    fn two_photons_follow_binomial_split() {
        let bs = BeamSplitter::new(0.79).unwrap();
        let (t, r) = (bs.t(), bs.r());
        let s = MultiModeState::product(&[
            (Mode(1), &ModeState::fock(2, 2).unwrap()),
            (Mode(2), &ModeState::vacuum(2)),
        ])
        .unwrap()
        .apply_beam_splitter((Mode(1), Mode(2)), &bs)
        .unwrap();
        assert_abs_diff_eq!(s.amplitude(&[2, 0]).re, t * t, epsilon = 1e-14);
        assert_abs_diff_eq!(s.amplitude(&[1, 1]).re, 2f64.sqrt() * t * r, epsilon = 1e-14);
        assert_abs_diff_eq!(s.amplitude(&[0, 2]).re, r * r, epsilon = 1e-14);
    }

    #[test]
    fn hong_ou_mandel_dip() {
        let s = MultiModeState::product(&[
            (Mode(1), &ModeState::fock(1, 2).unwrap()),
            (Mode(2), &ModeState::fock(1, 2).unwrap()),
        ])
        .unwrap()
        .apply_beam_splitter((Mode(1), Mode(2)), &BeamSplitter::balanced())
        .unwrap();
        assert_abs_diff_eq!(s.amplitude(&[1, 1]).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitude(&[2, 0]).norm_sqr(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s.amplitude(&[0, 2]).norm_sqr(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn beam_splitter_truncation_is_reported() {
        let s = MultiModeState::product(&[
            (Mode(1), &ModeState::fock(2, 2).unwrap()),
            (Mode(2), &ModeState::vacuum(1)),
        ])
        .unwrap();
        let err = s
            .apply_beam_splitter((Mode(1), Mode(2)), &BeamSplitter::new(0.5).unwrap())
            .unwrap_err();
        assert!(matches!(
            err,
            SimError::TruncationLoss {
                mode: Mode(2),
                suggested: 2,
                ..
            }
        ));
    }

    #[test]
    fn phase_shift_on_single_photon() {
        let s = ModeState::fock(1, 2).unwrap().apply_phase(std::f64::consts::PI);
        assert_abs_diff_eq!(s.amplitude(1).re, -1.0, epsilon = 1e-15);
        let z = ModeState::from_real(&[0.3, 0.4]).unwrap();
        assert_eq!(z.apply_phase(0.0), z);
    }

    #[test]
    fn phase_makes_coefficients_real() {
        let psi = ModeState::from_amplitudes(vec![C64::from_polar(0.6, 0.4), C64::from_polar(0.8, -1.1)]).unwrap();
        let (p0, p1) = (psi.amplitude(0).arg(), psi.amplitude(1).arg());
        let out = psi.scaled(C64::from_polar(1.0, -p0)).apply_phase(-(p1 - p0));
        for a in out.amplitudes() {
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-12);
            assert!(a.re >= 0.0);
        }
    }

    #[test]
    fn zero_displacement_is_identity() {
        let s = ModeState::from_real(&[0.6, 0.0, 0.8]).unwrap();
        assert_eq!(s.apply_displacement(C64::default()).unwrap(), s);
    }

    #[test]
    fn displacement_truncation_is_reported() {
        let err = ModeState::vacuum(3).apply_displacement(C64::new(2.0, 0.0)).unwrap_err();
        match err {
            SimError::TruncationLoss { suggested, .. } => assert!(suggested > 10),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tensor_rejects_duplicate_labels() {
        let s = MultiModeState::single(Mode(1), ModeState::vacuum(1));
        assert_eq!(
            s.tensor(Mode(1), &ModeState::vacuum(1)),
            Err(SimError::DuplicateMode(Mode(1)))
        );
    }
}
