//! Uniform rectangular grid, Neumann (cosine) spectral representation and
//! the calculus operators built on it.
//!
//! Fields are sampled at midpoint nodes `((i+1/2) lx/nx, (l+1/2) ly/ny)` and
//! stored x-major: value `(i, l)` lives at `i * ny + l`. Scalar spectra are in
//! the cosine eigenbasis `cos(j pi x/lx) cos(k pi y/ly)` of the Neumann
//! Laplacian, so homogeneous Neumann conditions hold structurally. Derivatives
//! switch an axis to the sine basis; a divergence switches it back.

use std::f64::consts::PI;

use crate::error::{ChdError, Result};
use crate::transform::{forward_2d, inverse_2d};

/// Relative tolerance used for the zero-mean solvability gates.
pub const MEAN_TOLERANCE: f64 = 1e-12;

/// One-dimensional basis of an axis in a spectral representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    Cosine,
    Sine,
}

impl Basis {
    /// Mode number stored at array index `idx` (sine modes start at 1).
    #[inline]
    pub fn mode(self, idx: usize) -> usize {
        match self {
            Basis::Cosine => idx,
            Basis::Sine => idx + 1,
        }
    }

    /// Discrete `L²` weight of the basis function at `idx`, as a fraction of the
    /// axis length. Matches midpoint quadrature exactly.
    #[inline]
    fn weight(self, idx: usize, n: usize) -> f64 {
        match self {
            Basis::Cosine if idx == 0 => 1.0,
            Basis::Sine if idx == n - 1 => 1.0,
            _ => 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 4 || n % 2 != 0 {
                return Err(ChdError::InvalidGrid(format!("{name} = {n} must be even and >= 4")));
            }
        }
        for (name, l) in [("lx", lx), ("ly", ly)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(ChdError::InvalidGrid(format!("{name} = {l} must be positive")));
            }
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Square grid `n x n` on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `|Omega|`
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn cell_area(&self) -> f64 {
        self.area() / self.len() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.lx / self.nx as f64
    }

    pub fn y(&self, l: usize) -> f64 {
        (l as f64 + 0.5) * self.ly / self.ny as f64
    }

    pub fn wavenumber_x(&self, mode: usize) -> f64 {
        mode as f64 * PI / self.lx
    }

    pub fn wavenumber_y(&self, mode: usize) -> f64 {
        mode as f64 * PI / self.ly
    }

    /// Neumann eigenvalue `(j pi/lx)^2 + (k pi/ly)^2`.
    pub fn eigenvalue(&self, j: usize, k: usize) -> f64 {
        let (a, b) = (self.wavenumber_x(j), self.wavenumber_y(k));
        a * a + b * b
    }

    /// Highest retained mode numbers under the 2/3 rule.
    pub fn dealias_limits(&self) -> (usize, usize) {
        (2 * self.nx / 3, 2 * self.ny / 3)
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(ChdError::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Nodal samples of a scalar function.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(ChdError::Shape {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ChdError::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Unchecked constructor for values produced internally.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self::from_raw(grid, vec![c; grid.len()])
    }

    /// Samples `f(x, y)` at the nodes.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx {
            let x = grid.x(i);
            for l in 0..grid.ny {
                values.push(f(x, grid.y(l)));
            }
        }
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.values[i * self.grid.ny + l]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.grid, other.grid, "zip_map across grids");
        Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    /// Midpoint quadrature of the field over the domain.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// `L²` inner product by midpoint quadrature.
    pub fn inner(&self, other: &Field) -> f64 {
        assert_eq!(self.grid, other.grid, "inner product across grids");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Root mean square, `‖f‖ / sqrt|Omega|`.
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Coefficients of a field in a product basis; `coeffs[j * ny + k]`.
///
/// With both axes in [`Basis::Cosine`] this is the Galerkin coordinate vector in
/// the Neumann eigenbasis; `coeffs[0]` is the mean.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    basis: [Basis; 2],
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec, basis: [Basis; 2]) -> Self {
        Self {
            grid,
            basis,
            coeffs: vec![0.0; grid.len()],
        }
    }

    pub fn new(grid: GridSpec, basis: [Basis; 2], coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(ChdError::Shape {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        if let Some(index) = coeffs.iter().position(|v| !v.is_finite()) {
            return Err(ChdError::NonFinite { index });
        }
        Ok(Self { grid, basis, coeffs })
    }

    /// Cosine-cosine spectrum.
    pub fn cosine(grid: GridSpec, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(grid, [Basis::Cosine; 2], coeffs)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn basis(&self) -> [Basis; 2] {
        self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.coeffs[j * self.grid.ny + k]
    }

    pub fn set(&mut self, j: usize, k: usize, v: f64) {
        self.coeffs[j * self.grid.ny + k] = v;
    }

    /// Mode numbers `(j, k)` of the coefficient at `(jx, ky)`.
    pub fn modes(&self, jx: usize, ky: usize) -> (usize, usize) {
        (self.basis[0].mode(jx), self.basis[1].mode(ky))
    }

    pub fn eigenvalue_at(&self, jx: usize, ky: usize) -> f64 {
        let (j, k) = self.modes(jx, ky);
        self.grid.eigenvalue(j, k)
    }

    fn is_cosine(&self) -> bool {
        self.basis == [Basis::Cosine; 2]
    }

    /// Mean value; only meaningful for a cosine spectrum.
    pub fn mean(&self) -> f64 {
        if self.is_cosine() {
            self.coeffs[0]
        } else {
            0.0
        }
    }

    /// Multiplies each coefficient by `g(lambda)` of its mode.
    pub fn map_eigen(&self, g: impl Fn(f64) -> f64) -> SpectralField {
        let mut out = self.clone();
        let ny = self.grid.ny;
        for jx in 0..self.grid.nx {
            for ky in 0..ny {
                out.coeffs[jx * ny + ky] *= g(self.eigenvalue_at(jx, ky));
            }
        }
        out
    }

    pub fn laplacian(&self) -> SpectralField {
        self.map_eigen(|lam| -lam)
    }

    pub fn scaled(&self, c: f64) -> SpectralField {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self + c * other`; bases must agree.
    pub fn add_scaled(&self, c: f64, other: &SpectralField) -> SpectralField {
        assert_eq!(self.basis, other.basis, "adding spectra in different bases");
        assert_eq!(self.grid, other.grid, "adding spectra on different grids");
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
        out
    }

    /// Derivative in x: cosine axis becomes sine and vice versa. A sine mode
    /// `n` has no cosine counterpart on the grid and is dropped.
    pub fn d_dx(&self) -> SpectralField {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut out = SpectralField::zeros(self.grid, [flip(self.basis[0]), self.basis[1]]);
        match self.basis[0] {
            Basis::Cosine => {
                for j in 1..nx {
                    let kx = self.grid.wavenumber_x(j);
                    for k in 0..ny {
                        out.coeffs[(j - 1) * ny + k] = -kx * self.coeffs[j * ny + k];
                    }
                }
            }
            Basis::Sine => {
                for j in 1..nx {
                    let kx = self.grid.wavenumber_x(j);
                    for k in 0..ny {
                        out.coeffs[j * ny + k] = kx * self.coeffs[(j - 1) * ny + k];
                    }
                }
            }
        }
        out
    }

    pub fn d_dy(&self) -> SpectralField {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut out = SpectralField::zeros(self.grid, [self.basis[0], flip(self.basis[1])]);
        for j in 0..nx {
            let row = &self.coeffs[j * ny..(j + 1) * ny];
            let dst = &mut out.coeffs[j * ny..(j + 1) * ny];
            match self.basis[1] {
                Basis::Cosine => {
                    for k in 1..ny {
                        dst[k - 1] = -self.grid.wavenumber_y(k) * row[k];
                    }
                }
                Basis::Sine => {
                    for k in 1..ny {
                        dst[k] = self.grid.wavenumber_y(k) * row[k - 1];
                    }
                }
            }
        }
        out
    }

    /// Discrete `L²` inner product through coefficients (equal to nodal
    /// midpoint quadrature).
    pub fn inner(&self, other: &SpectralField) -> f64 {
        assert_eq!(self.basis, other.basis, "inner product across bases");
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut acc = 0.0;
        for jx in 0..nx {
            let wx = self.basis[0].weight(jx, nx);
            let mut row = 0.0;
            for ky in 0..ny {
                let idx = jx * ny + ky;
                row += self.basis[1].weight(ky, ny) * self.coeffs[idx] * other.coeffs[idx];
            }
            acc += wx * row;
        }
        acc * self.grid.area()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.inner(self)
    }

    /// Weighted squared norm `sum w(lambda) |c|^2` over modes, optionally
    /// skipping the mean mode.
    pub(crate) fn weighted_norm_sq(&self, skip_mean: bool, w: impl Fn(f64) -> f64) -> f64 {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut acc = 0.0;
        for jx in 0..nx {
            let wx = self.basis[0].weight(jx, nx);
            for ky in 0..ny {
                if skip_mean && jx == 0 && ky == 0 && self.is_cosine() {
                    continue;
                }
                let c = self.coeffs[jx * ny + ky];
                acc += wx * self.basis[1].weight(ky, ny) * w(self.eigenvalue_at(jx, ky)) * c * c;
            }
        }
        acc * self.grid.area()
    }
}

fn flip(b: Basis) -> Basis {
    match b {
        Basis::Cosine => Basis::Sine,
        Basis::Sine => Basis::Cosine,
    }
}

/// A vector field; both components live on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    x: Field,
    y: Field,
}

impl VectorField {
    pub fn new(x: Field, y: Field) -> Result<Self> {
        x.grid().ensure_same(y.grid())?;
        Ok(Self { x, y })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            x: Field::zeros(grid),
            y: Field::zeros(grid),
        }
    }

    pub fn x(&self) -> &Field {
        &self.x
    }

    pub fn y(&self) -> &Field {
        &self.y
    }

    pub fn grid(&self) -> &GridSpec {
        self.x.grid()
    }

    /// `∫ |v|^2`
    pub fn l2_norm_sq(&self) -> f64 {
        self.x.inner(&self.x) + self.y.inner(&self.y)
    }

    pub fn inner(&self, other: &VectorField) -> f64 {
        self.x.inner(&other.x) + self.y.inner(&other.y)
    }

    pub fn scaled_by(&self, f: &Field) -> VectorField {
        VectorField {
            x: self.x.zip_map(f, |a, b| a * b),
            y: self.y.zip_map(f, |a, b| a * b),
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            x: self.x.sub(&other.x),
            y: self.y.sub(&other.y),
        }
    }
}

/// Spectrum of a vector field: x component in (sine, cosine), y component in
/// (cosine, sine), the natural pairing for gradients of Neumann functions.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVector {
    pub x: SpectralField,
    pub y: SpectralField,
}

impl SpectralVector {
    pub fn gradient_of(s: &SpectralField) -> SpectralVector {
        SpectralVector {
            x: s.d_dx(),
            y: s.d_dy(),
        }
    }

    pub fn from_nodal(v: &VectorField) -> SpectralVector {
        SpectralVector {
            x: to_spectral_in(v.x(), [Basis::Sine, Basis::Cosine]),
            y: to_spectral_in(v.y(), [Basis::Cosine, Basis::Sine]),
        }
    }

    pub fn to_nodal(&self) -> VectorField {
        VectorField {
            x: to_nodal(&self.x),
            y: to_nodal(&self.y),
        }
    }

    pub fn divergence(&self) -> SpectralField {
        self.x.d_dx().add_scaled(1.0, &self.y.d_dy())
    }

    pub fn dealiased(&self) -> SpectralVector {
        SpectralVector {
            x: dealias(&self.x),
            y: dealias(&self.y),
        }
    }

    pub fn scaled(&self, c: f64) -> SpectralVector {
        SpectralVector {
            x: self.x.scaled(c),
            y: self.y.scaled(c),
        }
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &SpectralVector) -> SpectralVector {
        SpectralVector {
            x: self.x.add_scaled(c, &other.x),
            y: self.y.add_scaled(c, &other.y),
        }
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.x.l2_norm_sq() + self.y.l2_norm_sq()
    }

    pub fn inner(&self, other: &SpectralVector) -> f64 {
        self.x.inner(&other.x) + self.y.inner(&other.y)
    }
}

pub(crate) fn to_spectral_in(f: &Field, basis: [Basis; 2]) -> SpectralField {
    let g = *f.grid();
    SpectralField {
        grid: g,
        basis,
        coeffs: forward_2d(f.values(), g.nx, g.ny, basis),
    }
}

/// Cosine-series coefficients of a nodal field.
pub fn to_spectral(f: &Field) -> Result<SpectralField> {
    if let Some(index) = f.values().iter().position(|v| !v.is_finite()) {
        return Err(ChdError::NonFinite { index });
    }
    Ok(to_spectral_in(f, [Basis::Cosine; 2]))
}

/// Nodal values of a spectrum (any basis).
pub fn to_nodal(s: &SpectralField) -> Field {
    let g = s.grid;
    Field::from_raw(g, inverse_2d(&s.coeffs, g.nx, g.ny, s.basis))
}

/// `|Omega|^-1 ∫ f`, by midpoint quadrature (equal to the zeroth cosine
/// coefficient).
pub fn mean(f: &Field) -> f64 {
    f.values().iter().sum::<f64>() / f.values().len() as f64
}

/// Orthogonal projection onto zero-mean functions.
pub fn project_zero_mean(f: &Field) -> Field {
    let m = mean(f);
    f.map(|v| v - m)
}

pub fn laplacian(f: &Field) -> Field {
    to_nodal(&to_spectral_in(f, [Basis::Cosine; 2]).laplacian())
}

pub fn gradient(f: &Field) -> VectorField {
    SpectralVector::gradient_of(&to_spectral_in(f, [Basis::Cosine; 2])).to_nodal()
}

pub fn divergence(v: &VectorField) -> Field {
    to_nodal(&SpectralVector::from_nodal(v).divergence())
}

/// Tolerance on `|mean|` for data whose RMS is `rms`.
pub fn mean_tolerance(rms: f64) -> f64 {
    MEAN_TOLERANCE * (1.0 + rms)
}

pub(crate) fn check_zero_mean(mean: f64, rms: f64) -> Result<()> {
    let tol = mean_tolerance(rms);
    if mean.abs() > tol || !mean.is_finite() {
        Err(ChdError::Compatibility { mean, tol })
    } else {
        Ok(())
    }
}

/// `A^{-1}` on a cosine spectrum: divides by the eigenvalue and fixes the
/// mean to zero. The caller is responsible for the compatibility check.
pub(crate) fn inverse_neg_laplacian_spectral(s: &SpectralField) -> SpectralField {
    debug_assert_eq!(s.basis, [Basis::Cosine; 2]);
    let mut out = s.map_eigen(|lam| if lam > 0.0 { 1.0 / lam } else { 0.0 });
    out.coeffs[0] = 0.0;
    out
}

/// Solves `-Δ v = f` with homogeneous Neumann data and `∫ v = 0`.
pub fn neg_laplacian_inverse(f: &Field) -> Result<Field> {
    let s = to_spectral(f)?;
    check_zero_mean(s.mean(), f.rms())?;
    Ok(to_nodal(&inverse_neg_laplacian_spectral(&s)))
}

/// Norm in `H^s`, `s ∈ [-2, 4]`:
/// `‖f‖² = |mean|²|Omega| + sum_{(j,k) != 0} (1 + lambda_jk)^s |c_jk|² ‖w_jk‖²`.
pub fn sobolev_norm(f: &Field, s: f64) -> Result<f64> {
    if !(-2.0..=4.0).contains(&s) {
        return Err(crate::error::invalid("s", format!("{s} outside [-2, 4]")));
    }
    Ok(sobolev_norm_spectral(&to_spectral(f)?, s))
}

pub(crate) fn sobolev_norm_spectral(c: &SpectralField, s: f64) -> f64 {
    let m = c.mean();
    let area = c.grid.area();
    (m * m * area + c.weighted_norm_sq(true, |lam| (1.0 + lam).powf(s))).sqrt()
}

/// Seminorm `‖A^{-1/2}(f - mean f)‖`.
pub fn hdot_minus_one_norm(f: &Field) -> f64 {
    hdot_minus_one_spectral(&to_spectral_in(f, [Basis::Cosine; 2]))
}

pub(crate) fn hdot_minus_one_spectral(c: &SpectralField) -> f64 {
    c.weighted_norm_sq(true, |lam| 1.0 / lam).sqrt()
}

/// 2/3-rule truncation: zeroes modes `j > floor(2 nx/3)` or `k > floor(2 ny/3)`.
pub fn dealias(s: &SpectralField) -> SpectralField {
    let (jmax, kmax) = s.grid.dealias_limits();
    let (nx, ny) = (s.grid.nx, s.grid.ny);
    let mut out = s.clone();
    for jx in 0..nx {
        let j = s.basis[0].mode(jx);
        for ky in 0..ny {
            if j > jmax || s.basis[1].mode(ky) > kmax {
                out.coeffs[jx * ny + ky] = 0.0;
            }
        }
    }
    out
}
