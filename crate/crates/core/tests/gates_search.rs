use approx::assert_abs_diff_eq;
use cvgate_core::gates::*;
use cvgate_core::optimize::*;
use cvgate_core::protocols::PipelineParams;
use cvgate_core::sweep::{sweep_window, SweepTask};
use cvgate_core::{Acceptance, ModeState};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ideal() -> NsgParams {
    NsgParams::new(AncillaSource::Ideal, Acceptance::Sharp)
}

#[test]
fn gate_is_linear_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = ideal();
    let basis: Vec<ModeState> = (0..=2)
        .map(|n| {
            nsg_circuit(&ModeState::fock(n, 2).unwrap(), &params)
                .unwrap()
                .amplitudes
                .unwrap()
        })
        .collect();
    for _ in 0..20 {
        let c: Vec<C64> = (0..3)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let input = ModeState::from_amplitudes(c.clone()).unwrap();
        let out = nsg_circuit(&input, &params).unwrap();
        let amps = out.amplitudes.as_ref().unwrap();
        // undo the global phase matching before comparing with the basis sum
        let raw: Vec<C64> = (0..=2)
            .map(|k| (0..=2).map(|n| c[n] * basis[n].amplitude(k)).sum())
            .collect();
        let phase = if raw[0].norm() > 1e-12 {
            amps.amplitude(0) / raw[0]
        } else {
            C64::new(1.0, 0.0)
        };
        for (k, r) in raw.iter().enumerate() {
            assert!((amps.amplitude(k) - phase * r).norm() < 1e-10);
        }
        let target = nsg_ideal_reference(&input).unwrap();
        assert_abs_diff_eq!(out.fidelity_with(&target).unwrap(), 1.0, epsilon = 1e-10);
    }
}

#[test]
fn probe_fidelity_agrees_with_basis_inputs() {
    let params = ideal();
    let probe = nsg_process_fidelity(&params).unwrap();
    assert_abs_diff_eq!(probe.fidelity, 1.0, epsilon = 1e-12);
    for n in 0..=2 {
        let input = ModeState::fock(n, 2).unwrap();
        let out = nsg_circuit(&input, &params).unwrap();
        assert_abs_diff_eq!(out.fidelity_with(&input).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.success_probability, probe.success_probability, epsilon = 1e-12);
    }
}

#[test]
fn windowed_gate_degrades_with_the_window() {
    let task = SweepTask::Nsg(ideal());
    let rows = sweep_window(&task, &[0.01, 0.2, 0.5]).unwrap();
    assert!(rows[0].fidelity > 0.999);
    assert!(rows.windows(2).all(|w| w[1].fidelity < w[0].fidelity));
    assert!(rows
        .windows(2)
        .all(|w| w[1].success_probability > w[0].success_probability));
}

#[test]
fn sweeps_are_deterministic() {
    let task = SweepTask::SinglePhotonPrep(PipelineParams::optimal(Acceptance::Sharp));
    let grid = [0.1, 0.3];
    let a = sweep_window(&task, &grid).unwrap();
    let b = sweep_window(&task, &grid).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.fidelity.to_bits(), y.fidelity.to_bits());
        assert_eq!(x.success_probability.to_bits(), y.success_probability.to_bits());
    }
}

#[test]
fn objective_prefers_the_known_optimum() {
    let obj = Objective::AtHermiteRoot;
    let known = obj.value([0.62, 0.79, 0.90]);
    assert!(known > obj.value([0.5, 0.5, 0.5]));
    let config = OptimizerConfig::default();
    let found = optimize_multistart(&config).unwrap();
    assert!(found.best.converged);
    assert!(found.best.objective >= known - 1e-6);
    let restart = optimize_transmittances(found.best.point(), &config).unwrap();
    for (a, b) in restart.point().iter().zip(found.best.point()) {
        assert!((a - b).abs() < 1e-3);
    }
    assert_eq!(optimize_multistart(&config).unwrap(), found);
}
