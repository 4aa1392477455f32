//! Turning a resource state into one with no vacuum component, either by a
//! fixed displacement or by a homodyne measurement with feed-forward.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::ResourceState;
use crate::error::{Result, SimError};
use crate::fock::{displacement_matrix, factorials, BeamSplitter, Mode, ModeState, MultiModeState};
use crate::measurement::{project_sharp, QuadratureKind};
use crate::quadrature::hermite_roots;

/// Roots of `⟨0|D(α)|ψ⟩ = 0` and the one selected for use.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementRoots {
    pub chosen: C64,
    /// All roots, sorted by modulus then by phase in `[0, 2π)`.
    pub roots: Vec<C64>,
}

/// Solves `Σ c_k (−α*)^k / √k! = 0` and picks the smallest root that leaves a
/// nonzero single-photon amplitude.
pub fn solve_vacuum_removal_displacement(resource: &ResourceState) -> Result<DisplacementRoots> {
    let n = resource.top_level();
    if n == 0 {
        return Err(SimError::InvalidParameter(
            "a vacuum resource cannot be made vacuum-free".into(),
        ));
    }
    let fact = factorials(n);
    let coeffs: Vec<C64> = (0..=n)
        .map(|k| resource.state().amplitude(k) / fact[k].sqrt())
        .collect();
    let mut roots: Vec<C64> = polynomial_roots(&coeffs).into_iter().map(|z| -z.conj()).collect();
    let phase = |z: &C64| {
        if z.norm() < 1e-12 {
            0.0
        } else {
            z.arg().rem_euclid(2.0 * PI)
        }
    };
    roots.sort_by(|a, b| {
        let (ma, mb) = (a.norm(), b.norm());
        if (ma - mb).abs() > 1e-9 * ma.max(mb).max(1.0) {
            ma.total_cmp(&mb)
        } else {
            phase(a).total_cmp(&phase(b))
        }
    });
    // d₁ vanishes exactly at repeated roots, where the displaced state has no |1⟩
    let chosen = roots
        .iter()
        .copied()
        .find(|&alpha| single_photon_amplitude(resource.state(), alpha).norm() > 1e-10)
        .ok_or(SimError::DegenerateResource)?;
    Ok(DisplacementRoots { chosen, roots })
}

fn single_photon_amplitude(psi: &ModeState, alpha: C64) -> C64 {
    let d = displacement_matrix(alpha, 1, psi.cutoff());
    (0..=psi.cutoff()).map(|k| d[(1, k)] * psi.amplitude(k)).sum()
}

/// Roots of `Σ coeffs[k] z^k` by Aberth–Ehrlich iteration with Newton polishing.
pub(crate) fn polynomial_roots(coeffs: &[C64]) -> Vec<C64> {
    let top = coeffs.iter().rposition(|c| c.norm() > 1e-14).unwrap_or(0);
    let zeros = coeffs.iter().position(|c| c.norm() > 1e-14).unwrap_or(0);
    let mut roots = vec![C64::default(); zeros];
    let reduced: Vec<C64> = coeffs[zeros..=top].iter().map(|c| c / coeffs[top]).collect();
    let deg = reduced.len() - 1;
    if deg == 0 {
        return roots;
    }
    let eval = |z: C64| -> (C64, C64) {
        let mut p = C64::default();
        let mut dp = C64::default();
        for c in reduced.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    let radius = 1.0 + reduced[..deg].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<C64> = (0..deg)
        .map(|k| C64::from_polar(0.5 * radius, 2.0 * PI * k as f64 / deg as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..deg {
            let (p, dp) = eval(z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..deg)
                .filter(|&j| j != k)
                .map(|j| C64::new(1.0, 0.0) / (z[k] - z[j]))
                .sum();
            let step = ratio / (C64::new(1.0, 0.0) - ratio * repulsion);
            z[k] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    for zk in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = eval(*zk);
            if dp.norm() > 0.0 {
                *zk -= p / dp;
            }
        }
    }
    roots.extend(z);
    roots
}

/// A vacuum-free state and the displacement that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct VacuumFree {
    pub state: ModeState,
    pub alpha: C64,
}

/// Displaces the resource by the chosen root. With `cutoff = None` the cutoff
/// grows until the displaced tail fits within tolerance.
pub fn remove_vacuum_displace(resource: &ResourceState, cutoff: Option<usize>) -> Result<VacuumFree> {
    let alpha = solve_vacuum_removal_displacement(resource)?.chosen;
    let state = displace_with_cutoff(resource.state(), alpha, cutoff)?;
    Ok(VacuumFree {
        state: state.normalize()?,
        alpha,
    })
}

fn displace_with_cutoff(psi: &ModeState, alpha: C64, cutoff: Option<usize>) -> Result<ModeState> {
    match cutoff {
        Some(c) => psi.with_cutoff(c)?.apply_displacement(alpha),
        None => {
            let mut c = psi.cutoff() + 8;
            loop {
                match psi.with_cutoff(c)?.apply_displacement(alpha) {
                    Err(SimError::TruncationLoss { suggested, .. }) if suggested > c => c = suggested,
                    Err(SimError::TruncationLoss { .. }) => c *= 2,
                    other => return other,
                }
            }
        }
    }
}

/// Which Hermite root the feed-forward displacement targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootChoice {
    /// Root nearest the measured value (smallest |α|); ties go to the larger root.
    #[default]
    Nearest,
    /// Always the largest root; for `N = 2` this is `1/√2` and `α = (r/t)(√2 x − 1)`.
    Largest,
}

/// Real displacement making `H_N(x̃) = 0` with `x̃ = x₃ − α t/(√2 r)`.
pub fn feedforward_alpha(n: usize, x3: f64, bs: &BeamSplitter, choice: RootChoice) -> Result<f64> {
    if n < 2 {
        return Err(SimError::InvalidParameter(format!(
            "feed-forward vacuum removal needs N ≥ 2, got {n}"
        )));
    }
    if bs.t() <= 0.0 || bs.r() <= 0.0 {
        return Err(SimError::InvalidParameter(
            "feed-forward splitter needs 0 < t < 1".into(),
        ));
    }
    let roots = hermite_roots(n);
    let root = match choice {
        RootChoice::Largest => *roots.last().expect("n ≥ 2 has roots"),
        RootChoice::Nearest => roots
            .iter()
            .copied()
            .min_by(|a, b| {
                let (da, db) = ((x3 - a).abs(), (x3 - b).abs());
                if (da - db).abs() < 1e-12 {
                    b.total_cmp(a)
                } else {
                    da.total_cmp(&db)
                }
            })
            .expect("n ≥ 2 has roots"),
    };
    Ok(SQRT_2 * bs.r() * (x3 - root) / bs.t())
}

/// `⟨x₃|_b U_t (|N⟩_a|0⟩_b)` as an unnormalised state on `mode`; its squared
/// norm is the density of the outcome `x₃`.
pub(crate) fn feedforward_branch(n: usize, bs: &BeamSplitter, x3: f64, mode: Mode) -> Result<MultiModeState> {
    let probe = Mode(mode.0 + 1_000);
    let split = MultiModeState::product(&[(mode, &ModeState::fock(n, n)?), (probe, &ModeState::vacuum(n))])?
        .apply_beam_splitter((mode, probe), bs)?;
    project_sharp(&split, probe, QuadratureKind::Amplitude, x3)
}

/// Outcome of the measured vacuum-removal branch.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedForwardOutcome {
    pub state: ModeState,
    pub alpha: f64,
    /// Probability density of the measured value.
    pub density: f64,
}

/// `|N⟩` through the splitter, `x` measured on the reflected mode, then `D(α)`.
pub fn remove_vacuum_feedforward(
    n: usize,
    bs: &BeamSplitter,
    x3: f64,
    choice: RootChoice,
    cutoff: Option<usize>,
) -> Result<FeedForwardOutcome> {
    let alpha = feedforward_alpha(n, x3, bs, choice)?;
    let branch = feedforward_branch(n, bs, x3, Mode(0))?.into_mode_state()?;
    let density = branch.norm_sqr();
    let displaced = displace_with_cutoff(&branch, C64::new(alpha, 0.0), cutoff)?;
    Ok(FeedForwardOutcome {
        state: displaced.normalize()?,
        alpha,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::hermite;
    use approx::assert_abs_diff_eq;

    #[test]
    fn equal_superposition_needs_unit_displacement() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let res = ResourceState::new(ModeState::from_real(&[h, h]).unwrap()).unwrap();
        let roots = solve_vacuum_removal_displacement(&res).unwrap();
        assert_abs_diff_eq!((roots.chosen - C64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn single_photon_needs_no_displacement() {
        let res = ResourceState::fock(1).unwrap();
        let roots = solve_vacuum_removal_displacement(&res).unwrap();
        assert_abs_diff_eq!(roots.chosen.norm(), 0.0);
        let out = remove_vacuum_displace(&res, Some(3)).unwrap();
        assert_abs_diff_eq!(out.state.amplitude(1).re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn fock_two_is_degenerate() {
        let res = ResourceState::fock(2).unwrap();
        assert_eq!(
            solve_vacuum_removal_displacement(&res),
            Err(SimError::DegenerateResource)
        );
    }

    #[test]
    fn roots_of_cubic() {
        // (z−1)(z+2)(z−i)
        let i = C64::new(0.0, 1.0);
        let one = C64::new(1.0, 0.0);
        let coeffs = vec![2.0 * i, -2.0 - i, one - i, one];
        let mut roots = polynomial_roots(&coeffs);
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert_abs_diff_eq!((roots[0] - C64::new(-2.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((roots[1] - i).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((roots[2] - one).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn feedforward_alpha_examples() {
        let ta = BeamSplitter::new(0.62).unwrap();
        let a = feedforward_alpha(2, std::f64::consts::FRAC_1_SQRT_2, &ta, RootChoice::Nearest).unwrap();
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-14);
        let a = feedforward_alpha(2, 0.0, &ta, RootChoice::Nearest).unwrap();
        assert_abs_diff_eq!(a, -ta.r() / ta.t(), epsilon = 1e-14);
        assert_abs_diff_eq!(a, -1.2655, epsilon = 1e-4);
        for x3 in [-1.7, -0.3, 0.2, 0.9, 2.4] {
            let a = feedforward_alpha(3, x3, &ta, RootChoice::Nearest).unwrap();
            let xt = x3 - a * ta.t() / (SQRT_2 * ta.r());
            assert!(hermite(3, xt).abs() < 1e-12, "x3={x3}");
            let eq9 = feedforward_alpha(2, x3, &ta, RootChoice::Largest).unwrap();
            assert_abs_diff_eq!(eq9, ta.r() / ta.t() * (x3 * SQRT_2 - 1.0), epsilon = 1e-13);
        }
        assert!(feedforward_alpha(1, 0.0, &ta, RootChoice::Nearest).is_err());
    }
}
