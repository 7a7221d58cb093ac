//! Trajectory-ensemble probes: sensitivity to initial data and pullback
//! behaviour under a translation-bounded source.

use rayon::prelude::*;

use crate::chemistry::PhysicsParams;
use crate::error::{invalid, ChdError, Result};
use crate::grid::{mean, sobolev_norm_spectral, to_spectral_in, Basis, Field, SpectralVector};
use crate::integrator::{integrate, step, step_count, SimState, StepperConfig};
use crate::source::{SourceKind, SourceModel};

#[derive(Clone, Debug)]
pub struct DependenceEntry {
    pub delta: f64,
    /// `‖phi1(T) - phi2(T)‖_{H¹} / (delta ‖dir‖_{H¹})`
    pub ratio: f64,
    /// `∫_0^T ‖∇(mu1 - mu2)‖² / (delta ‖dir‖_{H¹})²`
    pub grad_mu_integral: f64,
    /// `∫_0^T ‖u1 - u2‖² / (delta ‖dir‖_{H¹})²`
    pub velocity_integral: f64,
}

#[derive(Clone, Debug)]
pub struct DependenceReport {
    pub horizon: f64,
    pub entries: Vec<DependenceEntry>,
}

impl DependenceReport {
    /// `max r / min r - 1` over the entries.
    pub fn ratio_spread(&self) -> f64 {
        let (lo, hi) = self
            .entries
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(e.ratio), hi.max(e.ratio)));
        hi / lo - 1.0
    }
}

/// Runs paired trajectories from `phi0` and `phi0 + delta dir` to `horizon`
/// for each `delta`, in parallel.
pub fn continuous_dependence_probe(
    phi0: &Field,
    dir: &Field,
    deltas: &[f64],
    source: &SourceModel,
    cfg: &StepperConfig,
    params: &PhysicsParams,
    horizon: f64,
) -> Result<DependenceReport> {
    if deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(invalid("deltas", "must be positive"));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("deltas", "must be decreasing"));
    }
    let dir_norm = sobolev_norm_spectral(&to_spectral_in(dir, [Basis::Cosine; 2]), 1.0);
    if !(dir_norm > 0.0) {
        return Err(invalid("dir", "must be nonzero"));
    }
    let n_steps = step_count(0.0, horizon, cfg.dt);
    let entries = deltas
        .par_iter()
        .map(|&delta| {
            let mut a = SimState::new(0.0, phi0.clone(), source, params, cfg.dealias)?;
            let mut b = SimState::new(0.0, phi0.add_scaled(delta, dir), source, params, cfg.dealias)?;
            let scale = (delta * dir_norm).powi(2);
            let (mut gmu, mut vel) = (0.0, 0.0);
            for _ in 0..n_steps {
                gmu += cfg.dt
                    * SpectralVector::gradient_of(&a.mu_hat().add_scaled(-1.0, b.mu_hat())).l2_norm_sq();
                vel += cfg.dt * a.u_hat().add_scaled(-1.0, b.u_hat()).l2_norm_sq();
                a = step(&a, source, cfg, params)?;
                b = step(&b, source, cfg, params)?;
            }
            let diff = a.phi_hat().add_scaled(-1.0, b.phi_hat());
            Ok(DependenceEntry {
                delta,
                ratio: sobolev_norm_spectral(&diff, 1.0) / (delta * dir_norm),
                grad_mu_integral: gmu / scale,
                velocity_integral: vel / scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DependenceReport { horizon, entries })
}

#[derive(Clone, Debug)]
pub struct PullbackReport {
    pub t_star: f64,
    pub back_times: Vec<f64>,
    /// `‖U(t*, t*-T_k) phi0 - U(t*, t*-T_{k+1}) phi0‖_{H²}` for consecutive k.
    pub pairwise_h2: Vec<f64>,
    /// `‖phi(t*)‖_{H¹}` for each back time.
    pub terminal_h1: Vec<f64>,
    /// `(scale, ‖phi(t*)‖_{H¹})` from the largest back time with the
    /// zero-mean part of `phi0` multiplied by `scale`.
    pub scaled_terminal_h1: Vec<(f64, f64)>,
    pub terminal: Vec<Field>,
}

impl PullbackReport {
    /// `max / min - 1` of the scaled terminal norms.
    pub fn scaling_spread(&self) -> f64 {
        let vals = self.scaled_terminal_h1.iter().map(|p| p.1);
        let lo = vals.clone().fold(f64::INFINITY, f64::min);
        let hi = vals.fold(0.0, f64::max);
        hi / lo - 1.0
    }
}

/// Keeps the mean of `phi0` and multiplies its fluctuation by `scale`.
pub fn scale_fluctuation(phi0: &Field, scale: f64) -> Field {
    let m = mean(phi0);
    phi0.map(|v| m + scale * (v - m))
}

/// Evolves `phi0` from `t_star - T_k` to `t_star` for each back time `T_k`,
/// and from the largest back time for each fluctuation scaling.
pub fn pullback_probe(
    phi0: &Field,
    source: &SourceModel,
    back_times: &[f64],
    t_star: f64,
    scalings: &[f64],
    cfg: &StepperConfig,
    params: &PhysicsParams,
) -> Result<PullbackReport> {
    if matches!(source.kind(), SourceKind::SeparableDecay { .. } | SourceKind::Tabulated { .. }) {
        return Err(ChdError::UnsupportedVariant("pullback_probe"));
    }
    if back_times.is_empty() || back_times.iter().any(|t| !(*t > 0.0)) {
        return Err(invalid("back_times", "must be nonempty and positive"));
    }
    if back_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("back_times", "must be increasing"));
    }
    let longest = *back_times.last().unwrap();
    let mut jobs: Vec<(f64, f64)> = back_times.iter().map(|&b| (b, 1.0)).collect();
    jobs.extend(scalings.iter().map(|&s| (longest, s)));
    let finals = jobs
        .par_iter()
        .map(|&(back, scale)| {
            let t0 = t_star - back;
            let state = SimState::new(t0, scale_fluctuation(phi0, scale), source, params, cfg.dealias)?;
            let end = integrate(state, source, cfg, params, t_star)?;
            Ok(end.phi_hat().clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let (by_back, by_scale) = finals.split_at(back_times.len());
    Ok(PullbackReport {
        t_star,
        back_times: back_times.to_vec(),
        pairwise_h2: by_back
            .windows(2)
            .map(|w| sobolev_norm_spectral(&w[0].add_scaled(-1.0, &w[1]), 2.0))
            .collect(),
        terminal_h1: by_back.iter().map(|s| sobolev_norm_spectral(s, 1.0)).collect(),
        scaled_terminal_h1: scalings
            .iter()
            .zip(by_scale)
            .map(|(&sc, s)| (sc, sobolev_norm_spectral(s, 1.0)))
            .collect(),
        terminal: by_back.iter().map(crate::grid::to_nodal).collect(),
    })
}
