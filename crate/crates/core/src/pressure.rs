//! Pressure Poisson solve and Darcy velocity.
//!
//! The pressure solves `-Δp = S - div((gamma/eps) mu ∇phi)` with homogeneous
//! Neumann data and the gauge `∫p = 0`; the velocity is
//! `u = -∇p + (gamma/eps) mu ∇phi`. Both use the same dealiased adhesion
//! flux, so `div u = S` holds to roundoff in spectral arithmetic.

use crate::chemistry::PhysicsParams;
use crate::error::Result;
use crate::grid::{
    check_zero_mean, inverse_neg_laplacian_spectral, to_nodal, to_spectral_in, Basis, Field,
    SpectralField, SpectralVector, VectorField,
};

/// `(gamma/eps) mu ∇phi`, products at the nodes, optionally dealiased.
pub(crate) fn adhesion_flux(
    mu: &Field,
    grad_phi: &VectorField,
    params: &PhysicsParams,
    dealiased: bool,
) -> SpectralVector {
    let flux = grad_phi.scaled_by(&mu.scaled(params.coupling()));
    let s = SpectralVector::from_nodal(&flux);
    if dealiased {
        s.dealiased()
    } else {
        s
    }
}

/// `p_hat = A^{-1}(S_hat - div flux)`; `source_hat` must already be
/// compatibility-checked.
pub(crate) fn pressure_spectrum(source_hat: &SpectralField, flux: &SpectralVector) -> SpectralField {
    inverse_neg_laplacian_spectral(&source_hat.add_scaled(-1.0, &flux.divergence()))
}

/// `u_hat = -∇p_hat + flux`
pub(crate) fn velocity_spectrum(p_hat: &SpectralField, flux: &SpectralVector) -> SpectralVector {
    SpectralVector::gradient_of(p_hat).scaled(-1.0).add_scaled(1.0, flux)
}

fn nodal_gradient(phi: &Field) -> VectorField {
    SpectralVector::gradient_of(&to_spectral_in(phi, [Basis::Cosine; 2])).to_nodal()
}

/// Zero-mean pressure for the state `(phi, mu)` and source `s`.
///
/// Fails with [`crate::ChdError::Compatibility`] if `s` does not integrate to
/// zero.
pub fn solve_pressure(phi: &Field, mu: &Field, s: &Field, params: &PhysicsParams) -> Result<Field> {
    let s_hat = to_spectral_in(s, [Basis::Cosine; 2]);
    check_zero_mean(s_hat.mean(), s.rms())?;
    let flux = adhesion_flux(mu, &nodal_gradient(phi), params, true);
    Ok(to_nodal(&pressure_spectrum(&s_hat, &flux)))
}

/// Darcy velocity `u = -∇p + (gamma/eps) mu ∇phi`.
pub fn velocity(p: &Field, mu: &Field, phi: &Field, params: &PhysicsParams) -> VectorField {
    let flux = adhesion_flux(mu, &nodal_gradient(phi), params, true);
    velocity_spectrum(&to_spectral_in(p, [Basis::Cosine; 2]), &flux).to_nodal()
}

/// `‖div u - S‖`
pub fn divergence_constraint_residual(u: &VectorField, s: &Field) -> f64 {
    let div = SpectralVector::from_nodal(u).divergence();
    div.add_scaled(-1.0, &to_spectral_in(s, [Basis::Cosine; 2]))
        .l2_norm_sq()
        .sqrt()
}

/// `|‖∇p‖² - ∫(S p + (gamma/eps) mu ∇phi·∇p)|`, the identity obtained by
/// testing the pressure equation with `p`.
pub fn pressure_energy_identity_residual(
    p: &Field,
    s: &Field,
    mu: &Field,
    phi: &Field,
    params: &PhysicsParams,
) -> f64 {
    let grad_p = SpectralVector::gradient_of(&to_spectral_in(p, [Basis::Cosine; 2]));
    let flux = adhesion_flux(mu, &nodal_gradient(phi), params, true);
    (grad_p.l2_norm_sq() - s.inner(p) - flux.inner(&grad_p)).abs()
}
