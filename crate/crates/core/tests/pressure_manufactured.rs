use std::f64::consts::PI;

use chd_core::chemistry::chemical_potential;
use chd_core::grid::mean;
use chd_core::init;
use chd_core::pressure::{
    divergence_constraint_residual, pressure_energy_identity_residual, solve_pressure, velocity,
};
use chd_core::{Field, GridSpec, PhysicsParams};

/// `phi = a cos(pi x) cos(pi y)`, `mu = b cos(pi x)` on the unit square:
///
/// ```text
/// div(kappa mu ∇phi) = -kappa a b pi² cos(pi y) (3/2 cos(2 pi x) + 1/2)
/// ```
fn manufactured(g: GridSpec, params: &PhysicsParams) -> (Field, Field, Field, Field) {
    let (a, b) = (0.3, 0.7);
    let kappa = params.coupling();
    let phi = Field::from_fn(g, |x, y| a * (PI * x).cos() * (PI * y).cos());
    let mu = Field::from_fn(g, |x, _| b * (PI * x).cos());
    let p_star = Field::from_fn(g, |x, y| (PI * x).cos() * (PI * y).cos());
    let s = Field::from_fn(g, |x, y| {
        let neg_lap_p = 2.0 * PI * PI * (PI * x).cos() * (PI * y).cos();
        let div_flux = -kappa * a * b * PI * PI * (PI * y).cos() * (1.5 * (2.0 * PI * x).cos() + 0.5);
        neg_lap_p + div_flux
    });
    (phi, mu, p_star, s)
}

#[test]
fn manufactured_pressure_is_recovered() {
    for params in [PhysicsParams::default(), PhysicsParams::new(0.2, 1.5).unwrap()] {
        let g = GridSpec::unit_square(32).unwrap();
        let (phi, mu, p_star, s) = manufactured(g, &params);
        let p = solve_pressure(&phi, &mu, &s, &params).unwrap();
        assert!(p.sub(&p_star).l2_norm() < 1e-10);
        let u = velocity(&p, &mu, &phi, &params);
        assert!(divergence_constraint_residual(&u, &s) < 1e-9);
        assert!(pressure_energy_identity_residual(&p, &s, &mu, &phi, &params) < 1e-9);
    }
}

#[test]
fn random_states_satisfy_the_pressure_identity() {
    let g = GridSpec::new(32, 24, 1.0, 0.8).unwrap();
    let params = PhysicsParams::new(0.1, 0.5).unwrap();
    for seed in 0..10 {
        let phi = init::rough(g, 0.1, 1.0, 1.5, seed).unwrap();
        let mu = chemical_potential(&phi, &params);
        let s = init::rough(g, 0.0, 2.0, 1.0, 100 + seed).unwrap();
        let s = s.map(|v| v - mean(&s));
        let p = solve_pressure(&phi, &mu, &s, &params).unwrap();
        let grad_p_sq = chd_core::grid::gradient(&p).l2_norm_sq();
        let r = pressure_energy_identity_residual(&p, &s, &mu, &phi, &params);
        assert!(r <= 1e-9 * (1.0 + grad_p_sq), "seed {seed}: {r}");
        let u = velocity(&p, &mu, &phi, &params);
        assert!(divergence_constraint_residual(&u, &s) <= 1e-8 * (1.0 + s.l2_norm()));
        assert!(mean(&p).abs() <= 1e-13 * p.l2_norm());
    }
}
