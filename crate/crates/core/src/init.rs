//! Initial data generators. Random fields use `ChaCha8Rng` seeded with a
//! `u64`, so they are reproducible across platforms.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::grid::{mean, project_zero_mean, to_nodal, Basis, Field, GridSpec, SpectralField};

pub fn constant(grid: GridSpec, m: f64) -> Field {
    Field::constant(grid, m)
}

/// `m + amplitude cos(j pi x/lx) cos(k pi y/ly)`
pub fn cosine_perturbation(grid: GridSpec, m: f64, amplitude: f64, j: usize, k: usize) -> Field {
    let (wx, wy) = (grid.wavenumber_x(j), grid.wavenumber_y(k));
    Field::from_fn(grid, |x, y| m + amplitude * (wx * x).cos() * (wy * y).cos())
}

/// `m` plus i.i.d. uniform noise in `[-amplitude, amplitude]`, projected to
/// zero mean so the mean is exactly `m` up to roundoff.
pub fn random_seeded(grid: GridSpec, m: f64, amplitude: f64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Field::from_raw(
        grid,
        (0..grid.len())
            .map(|_| amplitude * rng.random_range(-1.0..=1.0))
            .collect(),
    );
    project_zero_mean(&noise).map(|v| v + m)
}

/// Field whose cosine coefficients are random with magnitude
/// `lambda^{-decay}`, rescaled so the zero-mean part has `H¹` seminorm
/// `amplitude`. With `decay = 0.6` the data lie in `H¹` but not uniformly
/// in `H²` as the grid is refined.
pub fn rough(grid: GridSpec, m: f64, amplitude: f64, decay: f64, seed: u64) -> Result<Field> {
    if !(amplitude > 0.0) {
        return Err(invalid("amplitude", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = SpectralField::zeros(grid, [Basis::Cosine; 2]);
    let (jmax, kmax) = grid.dealias_limits();
    for j in 0..grid.nx {
        for k in 0..grid.ny {
            if (j, k) == (0, 0) || j > jmax || k > kmax {
                continue;
            }
            let lam = grid.eigenvalue(j, k);
            s.set(j, k, rng.random_range(-1.0..=1.0) * lam.powf(-decay));
        }
    }
    let grad = crate::grid::SpectralVector::gradient_of(&s).l2_norm_sq().sqrt();
    let f = to_nodal(&s.scaled(amplitude / grad));
    let shift = m - mean(&f);
    Ok(f.map(|v| v + shift))
}
