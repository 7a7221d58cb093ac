//! Per-step observables, the discrete energy law, and power-law rate fits.

use std::io::Write;

use crate::chemistry::{chemical_potential, double_well, energy, energy_from_parts, PhysicsParams};
use crate::error::{invalid, ChdError, Result};
use crate::grid::{
    hdot_minus_one_spectral, sobolev_norm_spectral, to_spectral_in, Basis, Field, SpectralField,
    SpectralVector,
};
use crate::integrator::{SimState, TrajectoryRecord};
use crate::pressure::divergence_constraint_residual;
use crate::snapshot::format_real;
use crate::source::SourceModel;

/// Optional columns of a [`DiagnosticsRecord`].
#[derive(Clone, Debug, Default)]
pub struct DiagnosticsOptions {
    target: Option<SpectralField>,
    /// Tail weight of the modified energy `E + k1 ∫_t^∞ ‖S‖²`.
    pub k1: Option<f64>,
    /// `(c5, c9)` of the dissipativity functional.
    pub psi1: Option<(f64, f64)>,
}

impl DiagnosticsOptions {
    /// Adds the `Ḣ^{-1}` distance to `target` as a column.
    pub fn with_target(mut self, target: &Field) -> Self {
        self.target = Some(to_spectral_in(target, [Basis::Cosine; 2]));
        self
    }

    pub fn target(&self) -> Option<&SpectralField> {
        self.target.as_ref()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub energy_e0: f64,
    pub grad_mu_sq: f64,
    pub u_sq: f64,
    pub s_sq: f64,
    /// Absent on the first row of a trajectory.
    pub energy_law_residual: Option<f64>,
    pub p_norm: f64,
    pub grad_p_norm: f64,
    pub div_residual: f64,
    pub stationarity: f64,
    pub h1_norm: f64,
    pub lap_norm: f64,
    pub hm1_distance: Option<f64>,
    pub e_tilde: Option<f64>,
    pub psi1: Option<f64>,
}

pub const CSV_HEADER: &str = "t,mass,energy,energy_e0,grad_mu_sq,u_sq,s_sq,energy_law_residual,\
p_norm,grad_p_norm,div_residual,stationarity,h1_norm,lap_norm,hm1_distance,e_tilde,psi1";

impl DiagnosticsRecord {
    /// Observables of `state`; `prev` is the preceding state and its step
    /// size, used for the energy-law residual.
    pub fn compute(
        state: &SimState,
        source: &SourceModel,
        params: &PhysicsParams,
        prev: Option<(&SimState, f64)>,
        opts: &DiagnosticsOptions,
    ) -> Result<Self> {
        let t = state.t();
        let phi_hat = state.phi_hat();
        let grad_sq = SpectralVector::gradient_of(phi_hat).l2_norm_sq();
        let potential: f64 =
            state.phi().values().iter().map(|&v| double_well(v)).sum::<f64>() * phi_hat.grid().cell_area();
        let energy = 0.5 * params.eps * params.eps * grad_sq + potential;
        let s = source.evaluate(t)?;
        let s_sq = s.inner(&s);
        let energy_law_residual = match prev {
            Some((p, dt)) => Some(energy_law_residual(p, state, source, params, dt)?),
            None => None,
        };
        let p_hat = state.p_hat();
        let mut mu_zero = state.mu_hat().clone();
        mu_zero.coeffs_mut()[0] = 0.0;
        let hm1_distance = opts
            .target
            .as_ref()
            .map(|target| hdot_minus_one_spectral(&phi_hat.add_scaled(-1.0, target)));
        let e_tilde = match opts.k1 {
            Some(k1) => Some(energy + k1 * source.tail_integral(t)?),
            None => None,
        };
        let psi1 = opts
            .psi1
            .map(|(c5, c9)| energy + c5 * hdot_minus_one_spectral(phi_hat).powi(2) + c9 + 1.0);
        Ok(Self {
            t,
            mass: crate::grid::mean(state.phi()),
            energy,
            energy_e0: 0.5 * grad_sq + potential + 1.0,
            grad_mu_sq: SpectralVector::gradient_of(state.mu_hat()).l2_norm_sq(),
            u_sq: state.u_hat().l2_norm_sq(),
            s_sq,
            energy_law_residual,
            p_norm: p_hat.l2_norm_sq().sqrt(),
            grad_p_norm: SpectralVector::gradient_of(p_hat).l2_norm_sq().sqrt(),
            div_residual: divergence_constraint_residual(state.u(), &s),
            stationarity: mu_zero.l2_norm_sq().sqrt(),
            h1_norm: sobolev_norm_spectral(phi_hat, 1.0),
            lap_norm: phi_hat.laplacian().l2_norm_sq().sqrt(),
            hm1_distance,
            e_tilde,
            psi1,
        })
    }

    fn cells(&self) -> [Option<f64>; 17] {
        [
            Some(self.t),
            Some(self.mass),
            Some(self.energy),
            Some(self.energy_e0),
            Some(self.grad_mu_sq),
            Some(self.u_sq),
            Some(self.s_sq),
            self.energy_law_residual,
            Some(self.p_norm),
            Some(self.grad_p_norm),
            Some(self.div_residual),
            Some(self.stationarity),
            Some(self.h1_norm),
            Some(self.lap_norm),
            self.hm1_distance,
            self.e_tilde,
            self.psi1,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.cells().iter().flatten().all(|v| v.is_finite())
    }

    /// One CSV line (no newline); absent optional columns are empty.
    pub fn csv_row(&self) -> String {
        self.cells()
            .iter()
            .map(|c| c.map(format_real).unwrap_or_default())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Writes the header and one row per record.
pub fn write_csv(out: &mut impl Write, record: &TrajectoryRecord) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in &record.rows {
        writeln!(out, "{}", row.csv_row())?;
    }
    Ok(())
}

/// Residual of the discrete energy law between consecutive states:
///
/// ```text
/// | (E^{n+1} - E^n)/dt + ‖∇mu^n‖² + (‖u^n‖² - ∫p^n S^{n+1}) / kappa - ∫S^{n+1} mu^n (1 - phi^n) |
/// ```
///
/// with `kappa = gamma/eps`; for `gamma = eps` this is the classical form.
pub fn energy_law_residual(
    prev: &SimState,
    next: &SimState,
    source: &SourceModel,
    params: &PhysicsParams,
    dt: f64,
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    let e0 = energy_from_parts(prev.phi(), prev.phi_hat(), params);
    let e1 = energy_from_parts(next.phi(), next.phi_hat(), params);
    let s = source.evaluate(next.t())?;
    let kappa = params.coupling();
    let grad_mu = SpectralVector::gradient_of(prev.mu_hat()).l2_norm_sq();
    let u_sq = prev.u_hat().l2_norm_sq();
    let ps = prev.p().inner(&s);
    let growth = s.inner(&prev.mu().zip_map(prev.phi(), |m, p| m * (1.0 - p)));
    Ok(((e1 - e0) / dt + grad_mu + (u_sq - ps) / kappa - growth).abs())
}

/// Modified energy along a recorded trajectory.
#[derive(Clone, Debug)]
pub struct LyapunovReport {
    pub k1: f64,
    pub values: Vec<f64>,
    /// Largest `value[i+1] - value[i]` (0 if never increasing).
    pub max_increment: f64,
    /// Index of the step with the largest increment.
    pub worst_step: Option<usize>,
}

/// `E + k1 ∫_t^∞ ‖S‖²` along `record`.
pub fn lyapunov_tilde(record: &TrajectoryRecord, source: &SourceModel, k1: f64) -> Result<LyapunovReport> {
    let values = record
        .rows
        .iter()
        .map(|r| Ok(r.energy + k1 * source.tail_integral(r.t)?))
        .collect::<Result<Vec<f64>>>()?;
    let mut max_increment = 0.0;
    let mut worst_step = None;
    for (i, w) in values.windows(2).enumerate() {
        if w[1] - w[0] > max_increment {
            max_increment = w[1] - w[0];
            worst_step = Some(i + 1);
        }
    }
    Ok(LyapunovReport {
        k1,
        values,
        max_increment,
        worst_step,
    })
}

/// Doubles `k1` from `k1_start` until `accept` holds for the report, at most
/// `max_doublings` times; returns the last report either way.
pub fn sweep_k1(
    record: &TrajectoryRecord,
    source: &SourceModel,
    k1_start: f64,
    max_doublings: usize,
    accept: impl Fn(&LyapunovReport) -> bool,
) -> Result<LyapunovReport> {
    let mut k1 = k1_start;
    let mut report = lyapunov_tilde(record, source, k1)?;
    for _ in 0..max_doublings {
        if accept(&report) {
            break;
        }
        k1 *= 2.0;
        report = lyapunov_tilde(record, source, k1)?;
    }
    Ok(report)
}

/// `‖P0(-eps² Δphi + f'(phi))‖`
pub fn stationarity_residual(phi: &Field, params: &PhysicsParams) -> f64 {
    let mu = chemical_potential(phi, params);
    let mut hat = to_spectral_in(&mu, [Basis::Cosine; 2]);
    hat.coeffs_mut()[0] = 0.0;
    hat.l2_norm_sq().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    /// Decay exponent: `d ~ C (1+t)^{-lambda}`.
    pub lambda: f64,
    pub log_c: f64,
    /// Coefficient of determination of the log-log fit.
    pub r_squared: f64,
}

/// Least-squares fit of `log d` against `log(1+t)`.
pub fn rate_fit(times: &[f64], distances: &[f64]) -> Result<RateFit> {
    if times.len() != distances.len() {
        return Err(ChdError::Shape {
            expected: times.len(),
            got: distances.len(),
        });
    }
    if times.len() < 8 {
        return Err(ChdError::Degenerate(format!("{} samples, need at least 8", times.len())));
    }
    if let Some(d) = distances.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(ChdError::Degenerate(format!("distance {d} is not positive")));
    }
    if times.iter().any(|t| !(*t > -1.0)) {
        return Err(invalid("times", "must exceed -1"));
    }
    let xs: Vec<f64> = times.iter().map(|t| (1.0 + t).ln()).collect();
    let ys: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ChdError::Degenerate("all sample times coincide".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        lambda: -slope,
        log_c: my - slope * mx,
        r_squared,
    })
}

/// `E(phi) + c5 ‖A^{-1/2}(phi - mean)‖² + c9 + 1`
pub fn psi1_functional(phi: &Field, c5: f64, c9: f64, params: &PhysicsParams) -> Result<f64> {
    if !(c5 >= 0.0 && c9 >= 0.0) {
        return Err(invalid("c5/c9", "must be nonnegative"));
    }
    let hat = to_spectral_in(phi, [Basis::Cosine; 2]);
    Ok(energy(phi, params) + c5 * hdot_minus_one_spectral(&hat).powi(2) + c9 + 1.0)
}

/// `‖∇phi‖² + ‖phi‖⁴_{L⁴}`, the quantity the dissipativity functional controls.
pub fn psi1_controlled(phi: &Field) -> f64 {
    let grad = SpectralVector::gradient_of(&to_spectral_in(phi, [Basis::Cosine; 2])).l2_norm_sq();
    grad + phi.values().iter().map(|v| v.powi(4)).sum::<f64>() * phi.grid().cell_area()
}

/// Constant `C` with `psi1 >= C (‖∇phi‖² + ‖phi‖⁴_{L⁴})` for every `phi`,
/// from `phi²/2 <= phi⁴/8 + 1/2`. Requires `c9 >= |Omega|/2`.
pub fn psi1_lower_constant(params: &PhysicsParams, c9: f64, area: f64) -> Option<f64> {
    (c9 >= area / 2.0).then(|| (params.eps * params.eps / 2.0).min(0.125))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    #[test]
    fn rate_fit_recovers_power_law() {
        let times: Vec<f64> = (0..20).map(|k| 10.0 + 10.0 * k as f64).collect();
        let d: Vec<f64> = times.iter().map(|t| 3.0 * (1.0 + t).powf(-0.25)).collect();
        let fit = rate_fit(&times, &d).unwrap();
        assert!((fit.lambda - 0.25).abs() < 1e-6);
        assert!((fit.log_c - 3f64.ln()).abs() < 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn rate_fit_on_exponential_grows_with_window() {
        let fit_on = |a: f64| {
            let times: Vec<f64> = (0..10).map(|k| a + k as f64).collect();
            let d: Vec<f64> = times.iter().map(|t| (-0.5 * t).exp()).collect();
            rate_fit(&times, &d).unwrap().lambda
        };
        assert!(fit_on(20.0) > fit_on(5.0));
    }

    #[test]
    fn rate_fit_rejects_bad_input() {
        let t: Vec<f64> = (0..8).map(f64::from).collect();
        assert!(rate_fit(&t[..5], &[1.0; 5]).is_err());
        let mut d = vec![1.0; 8];
        d[3] = 0.0;
        assert!(matches!(rate_fit(&t, &d), Err(ChdError::Degenerate(_))));
    }

    #[test]
    fn stationarity_of_constant_is_exactly_zero() {
        let g = GridSpec::new(32, 16, 1.0, 2.0).unwrap();
        let p = PhysicsParams::with_eps(0.05).unwrap();
        for m in [0.0, 0.3, -0.8] {
            assert_eq!(stationarity_residual(&Field::constant(g, m), &p), 0.0);
        }
    }

    #[test]
    fn stationarity_of_cosine_matches_analytic_value() {
        // mu = pi² cos + cos³ - cos = (pi² - 1/4) cos + cos(3 pi x)/4
        let expect = ((PI * PI - 0.25).powi(2) / 2.0 + 1.0 / 32.0).sqrt();
        let p = PhysicsParams::default();
        for n in [16, 32] {
            let g = GridSpec::unit_square(n).unwrap();
            let r = stationarity_residual(&Field::from_fn(g, |x, _| (PI * x).cos()), &p);
            assert!((r - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn psi1_values() {
        let g = GridSpec::new(16, 16, 2.0, 1.0).unwrap();
        let p = PhysicsParams::with_eps(0.2).unwrap();
        let m = 0.4;
        let v = psi1_functional(&Field::constant(g, m), 3.0, 0.0, &p).unwrap();
        assert!((v - (g.area() * double_well(m) + 1.0)).abs() < 1e-13);
        let phi = Field::from_fn(g, |x, y| 0.5 * (PI * x).cos() * (PI * y).cos());
        let a = psi1_functional(&phi, 0.0, 0.0, &p).unwrap();
        let b = psi1_functional(&phi, 1.0, 0.0, &p).unwrap();
        assert!(b > a);
        assert!(psi1_functional(&phi, -1.0, 0.0, &p).is_err());
    }

    #[test]
    fn csv_row_has_one_cell_per_column() {
        let row = DiagnosticsRecord {
            t: 0.5,
            mass: 0.0,
            energy: -1.0,
            energy_e0: 0.0,
            grad_mu_sq: 0.0,
            u_sq: 0.0,
            s_sq: 0.0,
            energy_law_residual: None,
            p_norm: 0.0,
            grad_p_norm: 0.0,
            div_residual: 0.0,
            stationarity: 0.0,
            h1_norm: 0.0,
            lap_norm: 0.0,
            hm1_distance: Some(1.0),
            e_tilde: None,
            psi1: None,
        };
        let line = row.csv_row();
        assert_eq!(line.split(',').count(), CSV_HEADER.split(',').count());
        assert!(line.starts_with("5.0000000000000000e-1,"));
        assert!(line.contains(",,"));
    }
}
