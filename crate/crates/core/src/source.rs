//! Zero-mean mass sources `S(t, x)`.

use std::path::Path;

use crate::error::{invalid, ChdError, Result};
use crate::grid::{check_zero_mean, project_zero_mean, to_spectral_in, Basis, Field, GridSpec, SpectralField};
use crate::snapshot;

/// A zero-mean spatial profile with its cached spectrum and `L²` norm.
#[derive(Clone, Debug)]
pub struct Profile {
    field: Field,
    spectrum: SpectralField,
    norm_sq: f64,
}

impl Profile {
    /// Rejects profiles that do not integrate to zero.
    pub fn new(field: Field) -> Result<Self> {
        if !field.is_finite() {
            return Err(invalid("profile", "non-finite values"));
        }
        let spectrum = to_spectral_in(&field, [Basis::Cosine; 2]);
        check_zero_mean(spectrum.mean(), field.rms())?;
        let norm_sq = field.inner(&field);
        Ok(Self {
            field,
            spectrum,
            norm_sq,
        })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }
}

#[derive(Clone, Debug)]
pub enum SourceKind {
    Zero,
    /// `c (1+t)^{-(2+rho)/2} g`
    SeparableDecay { profile: Profile, amplitude: f64, rho: f64 },
    /// `a sin(omega t) g`
    PeriodicBounded { profile: Profile, amplitude: f64, omega: f64 },
    /// Piecewise-linear interpolation between snapshots, re-projected to zero mean.
    Tabulated { times: Vec<f64>, frames: Vec<Field> },
}

#[derive(Clone, Debug)]
pub struct SourceModel {
    grid: GridSpec,
    kind: SourceKind,
}

impl SourceModel {
    pub fn zero(grid: GridSpec) -> Self {
        Self {
            grid,
            kind: SourceKind::Zero,
        }
    }

    pub fn separable_decay(profile: Profile, amplitude: f64, rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(invalid("rho", format!("{rho} must be positive")));
        }
        if !amplitude.is_finite() {
            return Err(invalid("amplitude", "must be finite"));
        }
        Ok(Self {
            grid: *profile.field.grid(),
            kind: SourceKind::SeparableDecay { profile, amplitude, rho },
        })
    }

    pub fn periodic(profile: Profile, amplitude: f64, omega: f64) -> Result<Self> {
        if !(amplitude.is_finite() && omega.is_finite()) {
            return Err(invalid("amplitude/omega", "must be finite"));
        }
        Ok(Self {
            grid: *profile.field.grid(),
            kind: SourceKind::PeriodicBounded { profile, amplitude, omega },
        })
    }

    /// Frames must share one grid; times must be strictly increasing.
    pub fn tabulated(times: Vec<f64>, frames: Vec<Field>) -> Result<Self> {
        if times.is_empty() || times.len() != frames.len() {
            return Err(invalid("tabulated", "need one frame per time, at least one"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("tabulated", "times must be strictly increasing"));
        }
        let grid = *frames[0].grid();
        for f in &frames {
            grid.ensure_same(f.grid())?;
        }
        Ok(Self {
            grid,
            kind: SourceKind::Tabulated { times, frames },
        })
    }

    /// Loads a tabulated source from an index CSV with header `index,time,path`;
    /// relative paths resolve against the index file's directory.
    pub fn load_tabulated(index: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(index)?;
        let base = index.parent().unwrap_or(Path::new("."));
        let mut times = Vec::new();
        let mut frames = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with("index")) {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(ChdError::Parse {
                    line: n + 1,
                    msg: "expected `index,time,path`".into(),
                });
            }
            let t: f64 = parts[1].parse().map_err(|_| ChdError::Parse {
                line: n + 1,
                msg: format!("bad time `{}`", parts[1]),
            })?;
            let (frame, _) = snapshot::read(&base.join(parts[2]))?;
            times.push(t);
            frames.push(frame);
        }
        Self::tabulated(times, frames)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, SourceKind::Zero)
    }

    /// Scalar prefactor of the profile for separable variants.
    fn prefactor(&self, t: f64) -> Option<(f64, &Profile)> {
        match &self.kind {
            SourceKind::SeparableDecay { profile, amplitude, rho } => {
                Some((amplitude * (1.0 + t).powf(-(2.0 + rho) / 2.0), profile))
            }
            SourceKind::PeriodicBounded { profile, amplitude, omega } => {
                Some((amplitude * (omega * t).sin(), profile))
            }
            _ => None,
        }
    }

    /// `S(t, ·)`
    pub fn evaluate(&self, t: f64) -> Result<Field> {
        match &self.kind {
            SourceKind::Zero => Ok(Field::zeros(self.grid)),
            SourceKind::Tabulated { times, frames } => {
                let (start, end) = (times[0], *times.last().unwrap());
                if !(t >= start && t <= end) {
                    return Err(ChdError::OutOfRange { t, start, end });
                }
                let i = times.partition_point(|&s| s <= t).saturating_sub(1);
                if i + 1 >= times.len() {
                    return Ok(project_zero_mean(&frames[i]));
                }
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                let mixed = frames[i].scaled(1.0 - w).add_scaled(w, &frames[i + 1]);
                Ok(project_zero_mean(&mixed))
            }
            _ => {
                let (c, profile) = self.prefactor(t).expect("separable variant");
                Ok(profile.field.scaled(c))
            }
        }
    }

    /// Cosine spectrum of `S(t, ·)` with the mean coefficient pinned to zero.
    pub(crate) fn evaluate_spectral(&self, t: f64) -> Result<SpectralField> {
        if let Some((c, profile)) = self.prefactor(t) {
            let mut s = profile.spectrum.scaled(c);
            s.coeffs_mut()[0] = 0.0;
            return Ok(s);
        }
        if self.is_zero() {
            return Ok(SpectralField::zeros(self.grid, [Basis::Cosine; 2]));
        }
        let mut s = to_spectral_in(&self.evaluate(t)?, [Basis::Cosine; 2]);
        s.coeffs_mut()[0] = 0.0;
        Ok(s)
    }

    /// `‖S(t)‖²`
    pub fn norm_sq(&self, t: f64) -> Result<f64> {
        if let Some((c, profile)) = self.prefactor(t) {
            return Ok(c * c * profile.norm_sq);
        }
        if self.is_zero() {
            return Ok(0.0);
        }
        let s = self.evaluate(t)?;
        Ok(s.inner(&s))
    }

    /// `∫_t^∞ ‖S(s)‖² ds` for sources with a finite tail.
    pub fn tail_integral(&self, t: f64) -> Result<f64> {
        match &self.kind {
            SourceKind::Zero => Ok(0.0),
            SourceKind::SeparableDecay { profile, amplitude, rho } => {
                Ok(amplitude * amplitude * profile.norm_sq * (1.0 + t).powf(-(1.0 + rho)) / (1.0 + rho))
            }
            _ => Err(ChdError::UnsupportedVariant("tail_integral")),
        }
    }

    /// `∫_a^b ‖S(s)‖² ds`, closed form for the separable variants.
    pub fn window_integral(&self, a: f64, b: f64) -> Result<f64> {
        match &self.kind {
            SourceKind::Zero => Ok(0.0),
            SourceKind::SeparableDecay { .. } => Ok(self.tail_integral(a)? - self.tail_integral(b)?),
            SourceKind::PeriodicBounded { profile, amplitude, omega } => {
                // ∫ sin²(ωs) ds = s/2 - sin(2ωs)/(4ω)
                let prim = |s: f64| {
                    if *omega == 0.0 {
                        0.0
                    } else {
                        s / 2.0 - (2.0 * omega * s).sin() / (4.0 * omega)
                    }
                };
                Ok(amplitude * amplitude * profile.norm_sq * (prim(b) - prim(a)))
            }
            SourceKind::Tabulated { .. } => {
                let n = 64;
                let h = (b - a) / n as f64;
                let mut acc = 0.0;
                for k in 0..=n {
                    let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                    acc += w * self.norm_sq(a + k as f64 * h)?;
                }
                Ok(acc * h)
            }
        }
    }

    /// `sup_t ∫_t^{t+1} ‖S‖² ds`. Separable decay is taken from `start`;
    /// tabulated sources are scanned numerically over their time range.
    pub fn translation_bound(&self, start: f64) -> Result<f64> {
        match &self.kind {
            SourceKind::Zero => Ok(0.0),
            SourceKind::SeparableDecay { .. } => self.window_integral(start, start + 1.0),
            SourceKind::PeriodicBounded { profile, amplitude, omega } => {
                // max over phase of ∫_t^{t+1} sin² = 1/2 + |sin ω|/(2ω)
                let w = if *omega == 0.0 {
                    0.0
                } else {
                    0.5 + omega.sin().abs() / (2.0 * omega.abs())
                };
                Ok(amplitude * amplitude * profile.norm_sq * w)
            }
            SourceKind::Tabulated { times, .. } => {
                let (t0, t1) = (times[0], *times.last().unwrap());
                if t1 - t0 <= 1.0 {
                    return self.window_integral(t0, t1);
                }
                let samples = 200;
                let mut best: f64 = 0.0;
                for k in 0..=samples {
                    let a = t0 + (t1 - 1.0 - t0) * k as f64 / samples as f64;
                    best = best.max(self.window_integral(a, a + 1.0)?);
                }
                Ok(best)
            }
        }
    }

    /// Numeric sup of the unit-window integral over `[start, end]`.
    pub fn sampled_translation_bound(&self, start: f64, end: f64, samples: usize) -> Result<f64> {
        let mut best: f64 = 0.0;
        for k in 0..=samples {
            let a = start + (end - start) * k as f64 / samples as f64;
            best = best.max(self.window_integral(a, a + 1.0)?);
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::mean;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::unit_square(16).unwrap()
    }

    fn unit_profile() -> Profile {
        // ‖√2 cos(πx)‖ = 1 on the unit square
        Profile::new(Field::from_fn(grid(), |x, _| 2f64.sqrt() * (PI * x).cos())).unwrap()
    }

    #[test]
    fn nonzero_mean_profile_rejected() {
        let f = Field::from_fn(grid(), |x, _| 0.1 + (PI * x).cos());
        assert!(matches!(Profile::new(f), Err(ChdError::Compatibility { .. })));
    }

    #[test]
    fn evaluations() {
        let zero = SourceModel::zero(grid());
        assert_eq!(zero.evaluate(3.0).unwrap().max_abs(), 0.0);

        let p = unit_profile();
        let g = p.field().clone();
        let m = SourceModel::separable_decay(p.clone(), 1.0, 1.0).unwrap();
        assert!(m.evaluate(0.0).unwrap().sub(&g).max_abs() < 1e-15);
        let m2 = SourceModel::separable_decay(p, 2.0, 1.0).unwrap();
        assert!(m2.evaluate(3.0).unwrap().sub(&g.scaled(0.25)).max_abs() < 1e-15);
        assert!(SourceModel::separable_decay(unit_profile(), 1.0, 0.0).is_err());
    }

    #[test]
    fn tail_integrals() {
        assert_eq!(SourceModel::zero(grid()).tail_integral(2.0).unwrap(), 0.0);
        let m = SourceModel::separable_decay(unit_profile(), 1.0, 1.0).unwrap();
        assert!((m.tail_integral(0.0).unwrap() - 0.5).abs() < 1e-14);
        let per = SourceModel::periodic(unit_profile(), 1.0, 2.0).unwrap();
        assert!(matches!(per.tail_integral(0.0), Err(ChdError::UnsupportedVariant(_))));
        // (1+t)^{1+rho} · tail is constant
        let m = SourceModel::separable_decay(unit_profile(), 1.7, 0.5).unwrap();
        let c0 = m.tail_integral(0.0).unwrap();
        for t in [0.5, 3.0, 40.0, 1e3] {
            let c = (1.0f64 + t).powf(1.5) * m.tail_integral(t).unwrap();
            assert!((c - c0).abs() < 1e-12 * c0);
        }
    }

    #[test]
    fn periodic_translation_bound_brackets() {
        for (a, w) in [(1.0, 2.0), (0.5, 0.3), (2.0, 7.0)] {
            let m = SourceModel::periodic(unit_profile(), a, w).unwrap();
            let b = m.translation_bound(0.0).unwrap();
            assert!(b <= a * a * (1.0 + 1e-12) && b >= a * a / 4.0);
            let sampled = m.sampled_translation_bound(0.0, 20.0, 4000).unwrap();
            assert!(sampled <= b * (1.0 + 1e-12));
            assert!(sampled >= b * (1.0 - 1e-3));
        }
        let z = SourceModel::zero(grid());
        assert_eq!(z.translation_bound(0.0).unwrap(), 0.0);
    }

    #[test]
    fn tabulated_interpolation_and_range() {
        let g = grid();
        let a = Field::from_fn(g, |x, _| (PI * x).cos());
        let b = Field::from_fn(g, |_, y| (PI * y).cos() + 1e-3);
        let m = SourceModel::tabulated(vec![0.0, 1.0], vec![a.clone(), b.clone()]).unwrap();
        let mid = m.evaluate(0.5).unwrap();
        assert!(mean(&mid).abs() < 1e-15);
        let expect = project_zero_mean(&a.scaled(0.5).add_scaled(0.5, &b));
        assert!(mid.sub(&expect).max_abs() < 1e-14);
        assert!(matches!(m.evaluate(1.5), Err(ChdError::OutOfRange { .. })));
        assert!(matches!(m.evaluate(-0.1), Err(ChdError::OutOfRange { .. })));
        assert!(SourceModel::tabulated(vec![1.0, 1.0], vec![a.clone(), b]).is_err());
    }
}
