use std::f64::consts::PI;

use chd_core::chemistry::{chemical_potential, energy};
use chd_core::diagnostics::{
    lyapunov_tilde, psi1_controlled, psi1_functional, psi1_lower_constant, stationarity_residual,
};
use chd_core::grid::mean;
use chd_core::integrator::{run, RunOptions};
use chd_core::probes::{continuous_dependence_probe, pullback_probe};
use chd_core::steady::{constant_state, solve_stationary};
use chd_core::{init, Field, GridSpec, PhysicsParams, SimState, SourceModel, StepperConfig};

#[test]
fn nonconstant_steady_state_at_zero_mass() {
    let g = GridSpec::unit_square(64).unwrap();
    let params = PhysicsParams::with_eps(0.05).unwrap();
    let seed = init::cosine_perturbation(g, 0.0, 0.01, 1, 0);
    let tol = 1e-8;
    let out = solve_stationary(0.0, &seed, &params, tol, 50.0).unwrap();
    assert!(out.residual < tol);
    assert!(stationarity_residual(&out.phi, &params) < tol);
    assert!(mean(&out.phi).abs() < 1e-12);
    assert!(out.energy < energy(&Field::zeros(g), &params));
    assert!(out.energy <= energy(&seed, &params) + tol * seed.l2_norm());
    let mu = chemical_potential(&out.phi, &params);
    let m = mean(&mu);
    assert!(mu.values().iter().all(|v| (v - m).abs() < 1e-7));
}

#[test]
fn stationary_constants() {
    let g = GridSpec::unit_square(32).unwrap();
    let params = PhysicsParams::with_eps(0.05).unwrap();
    assert_eq!(stationarity_residual(&constant_state(0.0, g), &params), 0.0);
    assert_eq!(stationarity_residual(&constant_state(0.8, g), &params), 0.0);
}

#[test]
fn psi1_dominates_controlled_quantity() {
    let g = GridSpec::new(32, 32, 1.0, 1.0).unwrap();
    let params = PhysicsParams::with_eps(0.2).unwrap();
    let c9 = g.area() / 2.0;
    let analytic = psi1_lower_constant(&params, c9, g.area()).unwrap();
    // brute-force constant over random fields of varied amplitude and roughness
    let mut brute = f64::INFINITY;
    for seed in 0..60 {
        let amp = 0.05 * (1 + seed % 12) as f64;
        let phi = init::rough(g, 0.3 * ((seed % 7) as f64 - 3.0) / 3.0, amp, 0.6 + 0.1 * (seed % 5) as f64, seed).unwrap();
        let psi = psi1_functional(&phi, 1.0, c9, &params).unwrap();
        let ctrl = psi1_controlled(&phi);
        brute = brute.min(psi / ctrl);
        assert!(psi >= 1.0);
        assert!(psi >= analytic * ctrl);
    }
    assert!(brute >= analytic);
    assert!(psi1_lower_constant(&params, 0.1, g.area()).is_none());
}

#[test]
fn lyapunov_without_source_is_the_energy() {
    let g = GridSpec::unit_square(32).unwrap();
    let params = PhysicsParams::with_eps(0.08).unwrap();
    let src = SourceModel::zero(g);
    let s0 = SimState::new(0.0, init::random_seeded(g, 0.0, 0.05, 2), &src, &params, true).unwrap();
    let tr = run(s0, &src, &StepperConfig::new(1e-3).unwrap(), &params, 0.2, &RunOptions::default(), &mut []).unwrap();
    let rep = lyapunov_tilde(&tr.record, &src, 5.0).unwrap();
    for (v, r) in rep.values.iter().zip(&tr.record.rows) {
        assert_eq!(*v, r.energy);
    }
    assert_eq!(rep.max_increment, 0.0);
}

#[test]
fn dependence_probe_in_linear_regime() {
    let g = GridSpec::unit_square(32).unwrap();
    let params = PhysicsParams::with_eps(0.1).unwrap();
    let phi0 = init::cosine_perturbation(g, 0.2, 0.3, 1, 1);
    let dir = init::cosine_perturbation(g, 0.0, 1.0, 2, 1);
    let rep = continuous_dependence_probe(
        &phi0,
        &dir,
        &[1e-2, 1e-3, 1e-4],
        &SourceModel::zero(g),
        &StepperConfig::new(2e-3).unwrap(),
        &params,
        0.5,
    )
    .unwrap();
    assert!(rep.entries.iter().all(|e| e.ratio.is_finite() && e.ratio > 0.0));
    assert!(rep.ratio_spread() < 0.1);
    assert!(continuous_dependence_probe(&phi0, &dir, &[1e-3, 1e-2], &SourceModel::zero(g), &StepperConfig::default(), &params, 0.1).is_err());
}

#[test]
fn pullback_of_stable_constant_is_trivial() {
    let g = GridSpec::new(16, 16, PI, PI).unwrap();
    let params = PhysicsParams::with_eps(0.1).unwrap();
    let phi0 = constant_state(0.8, g);
    let rep = pullback_probe(
        &phi0,
        &SourceModel::zero(g),
        &[1.0, 2.0, 4.0],
        0.0,
        &[1.0, 3.0],
        &StepperConfig::new(0.05).unwrap(),
        &params,
    )
    .unwrap();
    for f in &rep.terminal {
        assert!(f.sub(&phi0).max_abs() < 1e-14);
    }
    assert!(rep.pairwise_h2.iter().all(|d| *d < 1e-13));
}
