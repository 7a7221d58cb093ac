//! Time advancement of the coupled system.
//!
//! Space is the cosine Galerkin discretization. Time uses a first-order,
//! linearly implicit scheme with stabilization `beta Δ(phi^{n+1} - phi^n)`:
//!
//! ```text
//! (phi^{n+1} - phi^n)/dt = -eps² Δ² phi^{n+1} + beta Δ(phi^{n+1} - phi^n)
//!                          + Δ f'(phi^n) - div(u^n phi^n) + S^{n+1}
//! ```
//!
//! The implicit operator is diagonal in the cosine basis, so each step is a
//! mode-wise division.

use crate::chemistry::{chemical_potential_spectrum, cubic_spectrum, PhysicsParams};
use crate::diagnostics::{DiagnosticsOptions, DiagnosticsRecord};
use crate::error::{invalid, ChdError, IntegrationFailure, Result};
use crate::grid::{mean, to_nodal, to_spectral_in, Basis, Field, SpectralField, SpectralVector, VectorField};
use crate::pressure::{adhesion_flux, pressure_spectrum, velocity_spectrum};
use crate::source::SourceModel;

/// `‖phi‖∞` above which a trajectory is declared blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    /// Stabilization coefficient; 2 = max |f''| on [-1, 1].
    pub beta: f64,
    /// Extra sweeps re-evaluating `f'` and `u` at the new iterate.
    pub picard_iters: usize,
    pub dealias: bool,
}

impl StepperConfig {
    pub fn new(dt: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("{} must be positive", self.dt)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(invalid("beta", format!("{} must be >= 0", self.beta)));
        }
        Ok(())
    }
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            beta: 2.0,
            picard_iters: 0,
            dealias: true,
        }
    }
}

/// Order parameter at time `t` with chemical potential, pressure and velocity
/// consistent with it.
#[derive(Clone, Debug)]
pub struct SimState {
    t: f64,
    phi: Field,
    phi_hat: SpectralField,
    cubic_hat: SpectralField,
    mu_hat: SpectralField,
    mu: Field,
    p_hat: SpectralField,
    p: Field,
    u_hat: SpectralVector,
    u: VectorField,
    initial_mass: f64,
    dealias: bool,
}

impl SimState {
    /// Builds the state and its caches; the pressure uses `S(t)`.
    pub fn new(
        t: f64,
        phi: Field,
        source: &SourceModel,
        params: &PhysicsParams,
        dealias: bool,
    ) -> Result<Self> {
        if !phi.is_finite() {
            return Err(ChdError::NonFinite {
                index: phi.values().iter().position(|v| !v.is_finite()).unwrap_or(0),
            });
        }
        source.grid().ensure_same(phi.grid())?;
        let phi_hat = to_spectral_in(&phi, [Basis::Cosine; 2]);
        let s_hat = source.evaluate_spectral(t)?;
        let initial_mass = mean(&phi);
        Ok(Self::assemble(t, phi, phi_hat, &s_hat, params, dealias, initial_mass))
    }

    fn assemble(
        t: f64,
        phi: Field,
        phi_hat: SpectralField,
        s_hat: &SpectralField,
        params: &PhysicsParams,
        dealias: bool,
        initial_mass: f64,
    ) -> Self {
        let cubic_hat = cubic_spectrum(&phi, dealias);
        let mu_hat = chemical_potential_spectrum(&phi_hat, &cubic_hat, params);
        let mu = to_nodal(&mu_hat);
        let grad_phi = SpectralVector::gradient_of(&phi_hat).to_nodal();
        let flux = adhesion_flux(&mu, &grad_phi, params, dealias);
        let p_hat = pressure_spectrum(s_hat, &flux);
        let p = to_nodal(&p_hat);
        let u_hat = velocity_spectrum(&p_hat, &flux);
        let u = u_hat.to_nodal();
        Self {
            t,
            phi,
            phi_hat,
            cubic_hat,
            mu_hat,
            mu,
            p_hat,
            p,
            u_hat,
            u,
            initial_mass,
            dealias,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn phi(&self) -> &Field {
        &self.phi
    }
    pub fn phi_hat(&self) -> &SpectralField {
        &self.phi_hat
    }
    pub fn mu(&self) -> &Field {
        &self.mu
    }
    pub fn mu_hat(&self) -> &SpectralField {
        &self.mu_hat
    }
    pub fn p(&self) -> &Field {
        &self.p
    }
    pub fn p_hat(&self) -> &SpectralField {
        &self.p_hat
    }
    pub fn u(&self) -> &VectorField {
        &self.u
    }
    pub fn u_hat(&self) -> &SpectralVector {
        &self.u_hat
    }
    /// Mean of `phi` when the trajectory started.
    pub fn initial_mass(&self) -> f64 {
        self.initial_mass
    }
    pub fn dealiased(&self) -> bool {
        self.dealias
    }
}

/// Diagnostics of one trajectory, in strictly increasing time.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryRecord {
    pub rows: Vec<DiagnosticsRecord>,
}

impl TrajectoryRecord {
    pub fn push(&mut self, row: DiagnosticsRecord) {
        if let Some(last) = self.rows.last() {
            assert!(row.t > last.t, "diagnostic times must increase");
        }
        self.rows.push(row);
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Explicit part `-div(u phi)` spectrum.
fn advection_spectrum(u: &VectorField, phi: &Field, dealias: bool) -> SpectralField {
    let flux = SpectralVector::from_nodal(&u.scaled_by(phi));
    let flux = if dealias { flux.dealiased() } else { flux };
    flux.divergence()
}

/// `Δmu + S - div(u phi)` for the cached state, with `S` at the state's time.
pub fn galerkin_rhs(state: &SimState, source: &SourceModel) -> Result<Field> {
    let s_hat = source.evaluate_spectral(state.t)?;
    let rhs = state
        .mu_hat
        .laplacian()
        .add_scaled(1.0, &s_hat)
        .add_scaled(-1.0, &advection_spectrum(&state.u, &state.phi, state.dealias));
    Ok(to_nodal(&rhs))
}

fn failure(state: &SimState, t: f64, reason: impl Into<String>) -> ChdError {
    ChdError::Integration(Box::new(IntegrationFailure {
        t,
        reason: reason.into(),
        last_good: state.clone(),
        partial: TrajectoryRecord::default(),
    }))
}

/// Advances to `t_next = state.t + dt`, where `dt` is taken from the config.
pub fn step(
    state: &SimState,
    source: &SourceModel,
    cfg: &StepperConfig,
    params: &PhysicsParams,
) -> Result<SimState> {
    advance(state, state.t + cfg.dt, source, cfg, params)
}

fn advance(
    state: &SimState,
    t_next: f64,
    source: &SourceModel,
    cfg: &StepperConfig,
    params: &PhysicsParams,
) -> Result<SimState> {
    cfg.validate()?;
    let dt = cfg.dt;
    let e2 = params.eps * params.eps;
    let s_next = source.evaluate_spectral(t_next)?;

    // Lagged quantities: (phi_hat, f'_hat, u, phi) of the current iterate.
    let mut lag_phi_hat = state.phi_hat.clone();
    let mut lag_fprime = state.cubic_hat.add_scaled(-1.0, &state.phi_hat);
    let mut lag_advect = advection_spectrum(&state.u, &state.phi, cfg.dealias);
    let mut sweep = 0;
    loop {
        let mut next_hat = state.phi_hat.clone();
        {
            let ny = next_hat.grid().ny;
            let nx = next_hat.grid().nx;
            let g = *next_hat.grid();
            let coeffs = next_hat.coeffs_mut();
            for j in 0..nx {
                for k in 0..ny {
                    let lam = g.eigenvalue(j, k);
                    let idx = j * ny + k;
                    let rhs = coeffs[idx] + dt * cfg.beta * lam * lag_phi_hat.coeffs()[idx]
                        - dt * lam * lag_fprime.coeffs()[idx]
                        - dt * lag_advect.coeffs()[idx]
                        + dt * s_next.coeffs()[idx];
                    coeffs[idx] = rhs / (1.0 + dt * (e2 * lam * lam + cfg.beta * lam));
                }
            }
        }
        if next_hat.coeffs().iter().any(|v| !v.is_finite()) {
            return Err(failure(state, t_next, "non-finite spectral coefficients"));
        }
        let phi = to_nodal(&next_hat);
        let peak = phi.max_abs();
        if !peak.is_finite() || peak > BLOWUP_THRESHOLD {
            return Err(failure(state, t_next, format!("‖phi‖∞ = {peak:e} exceeds blow-up threshold")));
        }
        let next = SimState::assemble(
            t_next,
            phi,
            next_hat,
            &s_next,
            params,
            cfg.dealias,
            state.initial_mass,
        );
        if sweep == cfg.picard_iters {
            return Ok(next);
        }
        sweep += 1;
        lag_fprime = next.cubic_hat.add_scaled(-1.0, &next.phi_hat);
        lag_advect = advection_spectrum(&next.u, &next.phi, cfg.dealias);
        lag_phi_hat = next.phi_hat;
    }
}

/// Callback invoked with the initial state (step 0) and after every step.
pub trait Observer {
    fn observe(&mut self, step: usize, state: &SimState, row: Option<&DiagnosticsRecord>) -> Result<()>;
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Record diagnostics every this many steps (the final step is always recorded).
    pub diagnostics_every: usize,
    pub diagnostics: DiagnosticsOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            diagnostics_every: 1,
            diagnostics: DiagnosticsOptions::default(),
        }
    }
}

pub struct Trajectory {
    pub state: SimState,
    pub record: TrajectoryRecord,
}

/// Number of steps of size `dt` covering `[t0, t_end]` (rounded).
pub fn step_count(t0: f64, t_end: f64, dt: f64) -> usize {
    ((t_end - t0) / dt).round().max(0.0) as usize
}

/// Steps from `state0.t` to `t_end`. Times are `t0 + n dt` so they do not
/// drift. On failure the error carries the last good state and the partial
/// record.
pub fn run(
    state0: SimState,
    source: &SourceModel,
    cfg: &StepperConfig,
    params: &PhysicsParams,
    t_end: f64,
    opts: &RunOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    cfg.validate()?;
    if !(t_end >= state0.t) {
        return Err(invalid("t_end", format!("{t_end} precedes start {}", state0.t)));
    }
    let every = opts.diagnostics_every.max(1);
    let t0 = state0.t;
    let n_steps = step_count(t0, t_end, cfg.dt);
    let mut record = TrajectoryRecord::default();
    let first = DiagnosticsRecord::compute(&state0, source, params, None, &opts.diagnostics)?;
    for obs in observers.iter_mut() {
        obs.observe(0, &state0, Some(&first))?;
    }
    record.push(first);

    let mut state = state0;
    for n in 1..=n_steps {
        let t_next = t0 + n as f64 * cfg.dt;
        let next = match advance(&state, t_next, source, cfg, params) {
            Ok(s) => s,
            Err(ChdError::Integration(mut f)) => {
                f.partial = record;
                return Err(ChdError::Integration(f));
            }
            Err(e) => return Err(e),
        };
        let row = if n % every == 0 || n == n_steps {
            Some(DiagnosticsRecord::compute(
                &next,
                source,
                params,
                Some((&state, cfg.dt)),
                &opts.diagnostics,
            )?)
        } else {
            None
        };
        for obs in observers.iter_mut() {
            obs.observe(n, &next, row.as_ref())?;
        }
        if let Some(row) = row {
            record.push(row);
        }
        state = next;
    }
    Ok(Trajectory { state, record })
}

/// Advances without diagnostics; used by probes that only need end states.
pub fn integrate(
    state0: SimState,
    source: &SourceModel,
    cfg: &StepperConfig,
    params: &PhysicsParams,
    t_end: f64,
) -> Result<SimState> {
    cfg.validate()?;
    let t0 = state0.t;
    let mut state = state0;
    for n in 1..=step_count(t0, t_end, cfg.dt) {
        state = advance(&state, t0 + n as f64 * cfg.dt, source, cfg, params)?;
    }
    Ok(state)
}
