//! Double-well potential, chemical potential and free energies.

use crate::error::{invalid, Result};
use crate::grid::{dealias, to_nodal, to_spectral_in, Basis, Field, SpectralField, SpectralVector};

/// Interface width `eps` and adhesion coefficient `gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicsParams {
    pub eps: f64,
    pub gamma: f64,
}

impl PhysicsParams {
    pub fn new(eps: f64, gamma: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(invalid("eps", format!("{eps} must be positive")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", format!("{gamma} must be positive")));
        }
        Ok(Self { eps, gamma })
    }

    pub fn with_eps(eps: f64) -> Result<Self> {
        Self::new(eps, 1.0)
    }

    /// Coupling `gamma / eps` in front of `mu ∇phi` in Darcy's law.
    pub fn coupling(&self) -> f64 {
        self.gamma / self.eps
    }
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self { eps: 1.0, gamma: 1.0 }
    }
}

/// `f(v) = v^4/4 - v^2/2`
#[inline]
pub fn double_well(v: f64) -> f64 {
    let v2 = v * v;
    0.25 * v2 * v2 - 0.5 * v2
}

/// `f'(v) = v^3 - v`
#[inline]
pub fn double_well_prime(v: f64) -> f64 {
    v * v * v - v
}

/// `f''(v) = 3 v^2 - 1`
#[inline]
pub fn double_well_second(v: f64) -> f64 {
    3.0 * v * v - 1.0
}

/// Spectrum of `phi^3`, formed at the nodes and optionally 2/3-truncated.
pub(crate) fn cubic_spectrum(phi: &Field, dealiased: bool) -> SpectralField {
    let cube = to_spectral_in(&phi.map(|v| v * v * v), [Basis::Cosine; 2]);
    if dealiased {
        dealias(&cube)
    } else {
        cube
    }
}

/// `mu_hat = eps^2 lambda phi_hat + cubic_hat - phi_hat`.
pub(crate) fn chemical_potential_spectrum(
    phi_hat: &SpectralField,
    cubic_hat: &SpectralField,
    params: &PhysicsParams,
) -> SpectralField {
    let e2 = params.eps * params.eps;
    phi_hat
        .map_eigen(|lam| e2 * lam - 1.0)
        .add_scaled(1.0, cubic_hat)
}

/// `mu = -eps^2 Δphi + f'(phi)`, with the cubic formed pseudospectrally and
/// dealiased.
pub fn chemical_potential(phi: &Field, params: &PhysicsParams) -> Field {
    let phi_hat = to_spectral_in(phi, [Basis::Cosine; 2]);
    let cubic = cubic_spectrum(phi, true);
    to_nodal(&chemical_potential_spectrum(&phi_hat, &cubic, params))
}

fn gradient_energy(phi_hat: &SpectralField) -> f64 {
    SpectralVector::gradient_of(phi_hat).l2_norm_sq()
}

fn potential_energy(phi: &Field) -> f64 {
    phi.values().iter().map(|&v| double_well(v)).sum::<f64>() * phi.grid().cell_area()
}

pub(crate) fn energy_from_parts(phi: &Field, phi_hat: &SpectralField, params: &PhysicsParams) -> f64 {
    0.5 * params.eps * params.eps * gradient_energy(phi_hat) + potential_energy(phi)
}

/// `E(phi) = ∫ eps²/2 |∇phi|² + f(phi)`
pub fn energy(phi: &Field, params: &PhysicsParams) -> f64 {
    energy_from_parts(phi, &to_spectral_in(phi, [Basis::Cosine; 2]), params)
}

/// `E_0(phi) = ½‖∇phi‖² + ∫ f(phi) + 1`, always with unit interface width.
pub fn energy_e0(phi: &Field) -> f64 {
    0.5 * gradient_energy(&to_spectral_in(phi, [Basis::Cosine; 2])) + potential_energy(phi) + 1.0
}
