//! Gronwall-type bounds for `y' + gamma y <= f y^omega + g` and a
//! brute-force checker that integrates the equality case.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, ChdError, Result};

/// `Q(gamma, A1, A2) = (e^{gamma/2}/(1-e^{-gamma/2}) A1)² + 2e^gamma/(1-e^{-gamma}) A2`
pub fn q_value(gamma: f64, a1: f64, a2: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid("gamma", format!("{gamma} must be positive")));
    }
    if !(a1 >= 0.0 && a2 >= 0.0) {
        return Err(invalid("a1/a2", "must be nonnegative"));
    }
    let k1 = (gamma / 2.0).exp() / (-(-gamma / 2.0).exp_m1());
    let k2 = 2.0 * gamma.exp() / (-(-gamma).exp_m1());
    Ok((k1 * a1).powi(2) + k2 * a2)
}

/// Kernel constant `e^gamma / (1 - e^{-gamma})`.
pub fn kernel_constant(gamma: f64) -> f64 {
    gamma.exp() / (-(-gamma).exp_m1())
}

/// `2 y0 e^{-gamma (t - tau)} + Q(gamma, A1, A2)`, the bound for `omega = 1/2`.
pub fn half_power_bound(gamma: f64, a1: f64, a2: f64, y0: f64, elapsed: f64) -> Result<f64> {
    Ok(2.0 * y0 * (-gamma * elapsed).exp() + q_value(gamma, a1, a2)?)
}

/// Exponent `a_n = (n+1)/(n+2)`.
pub fn exponent(n: u32) -> f64 {
    (n as f64 + 1.0) / (n as f64 + 2.0)
}

fn ratio(a: u64, b: u64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

/// Base value of the decay-rate sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ThetaZero {
    /// `theta_0 = 1`, matching the closed form `(n+2)/2^{n+1}`.
    #[default]
    One,
    /// `theta_0 = 1/2`.
    Half,
}

impl ThetaZero {
    fn value(self) -> BigRational {
        match self {
            ThetaZero::One => BigRational::one(),
            ThetaZero::Half => ratio(1, 2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceParams {
    pub alpha: BigRational,
    pub beta: BigRational,
    pub theta: BigRational,
}

impl SequenceParams {
    pub fn to_f64(&self) -> (f64, f64, f64) {
        let f = |r: &BigRational| r.to_f64().expect("representable");
        (f(&self.alpha), f(&self.beta), f(&self.theta))
    }
}

/// Closed forms `alpha_n = (n+2) sum_{j=2}^{n+1} 1/j`, `beta_n = (n+2)/2`,
/// `theta_n = (n+2)/2^{n+1}`.
pub fn sequence_params(n: u32) -> SequenceParams {
    let n = n as u64;
    let mut harmonic = BigRational::zero();
    for j in 2..=n + 1 {
        harmonic += ratio(1, j);
    }
    SequenceParams {
        alpha: harmonic * BigRational::from_integer(BigInt::from(n + 2)),
        beta: ratio(n + 2, 2),
        theta: BigRational::new(BigInt::from(n + 2), BigInt::from(2u8).pow(n as u32 + 1)),
    }
}

/// The same sequences generated by
/// `alpha_{n+1} = (1+alpha_n)/a_{n+1}`, `beta_{n+1} = beta_n/a_{n+1}`,
/// `theta_{n+1} = theta_n/(2 a_{n+1})` from `(0, 1, theta_0)`.
pub fn sequence_by_recurrence(n: u32, theta0: ThetaZero) -> SequenceParams {
    let mut p = SequenceParams {
        alpha: BigRational::zero(),
        beta: BigRational::one(),
        theta: theta0.value(),
    };
    for m in 1..=n as u64 {
        let a = ratio(m + 1, m + 2);
        p = SequenceParams {
            alpha: (BigRational::one() + &p.alpha) / &a,
            beta: &p.beta / &a,
            theta: &p.theta / (&a * BigRational::from_integer(BigInt::from(2))),
        };
    }
    p
}

/// Nonnegative function, constant on consecutive pieces of equal width
/// starting at `start`, and zero after the last piece.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseConstant {
    pub start: f64,
    pub width: f64,
    pub values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(start: f64, width: f64, values: Vec<f64>) -> Result<Self> {
        if !(width > 0.0) {
            return Err(invalid("width", "must be positive"));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid("values", "must be finite and nonnegative"));
        }
        Ok(Self { start, width, values })
    }

    pub fn constant(start: f64, end: f64, value: f64) -> Result<Self> {
        Self::new(start, end - start, vec![value])
    }

    pub fn end(&self) -> f64 {
        self.start + self.width * self.values.len() as f64
    }

    /// Breakpoints, including both ends.
    pub fn breaks(&self) -> Vec<f64> {
        (0..=self.values.len())
            .map(|i| self.start + self.width * i as f64)
            .collect()
    }

    /// Value on the piece containing `t` (right-continuous).
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.start {
            return 0.0;
        }
        let i = ((t - self.start) / self.width).floor() as usize;
        self.values.get(i).copied().unwrap_or(0.0)
    }

    /// `∫_a^b`, exact.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let mut acc = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let lo = (self.start + self.width * i as f64).max(a);
            let hi = (self.start + self.width * (i + 1) as f64).min(b);
            if hi > lo {
                acc += v * (hi - lo);
            }
        }
        acc
    }

    /// `sup_{t >= start} ∫_t^{t+1}`. The window integral is piecewise linear
    /// in `t` with kinks where `t` or `t+1` hits a breakpoint, so checking
    /// those points is exact.
    pub fn window_sup(&self) -> f64 {
        let mut best: f64 = 0.0;
        for b in self.breaks() {
            for t in [b, b - 1.0] {
                if t >= self.start {
                    best = best.max(self.integral(t, t + 1.0));
                }
            }
        }
        best
    }

    /// `∫_tau^t m(s) e^{-gamma (t-s)} ds`, exact.
    pub fn kernel_integral(&self, gamma: f64, tau: f64, t: f64) -> f64 {
        let mut acc = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let lo = (self.start + self.width * i as f64).max(tau);
            let hi = (self.start + self.width * (i + 1) as f64).min(t);
            if hi > lo {
                acc += v * ((-gamma * (t - hi)).exp() - (-gamma * (t - lo)).exp()) / gamma;
            }
        }
        acc
    }
}

#[derive(Clone, Debug)]
pub struct GronwallInstance {
    pub gamma: f64,
    /// Index of the exponent `a_n`.
    pub n: u32,
    pub y0: f64,
    pub tau: f64,
    pub horizon: f64,
    pub f: PiecewiseConstant,
    pub g: PiecewiseConstant,
    pub a1: f64,
    pub a2: f64,
    pub theta0: ThetaZero,
}

impl GronwallInstance {
    /// Checks positivity, `y0 >= 1`, and the window bounds of `f`, `g`.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(invalid("gamma", "must be positive"));
        }
        if !(self.y0 >= 1.0) {
            return Err(invalid("y0", "must be at least 1"));
        }
        if !(self.horizon > self.tau) {
            return Err(invalid("horizon", "must exceed tau"));
        }
        let slack = 1e-12;
        if self.f.window_sup() > self.a1 * (1.0 + slack) {
            return Err(invalid("f", format!("window integral {} exceeds A1 = {}", self.f.window_sup(), self.a1)));
        }
        if self.g.window_sup() > self.a2 * (1.0 + slack) {
            return Err(invalid("g", format!("window integral {} exceeds A2 = {}", self.g.window_sup(), self.a2)));
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        exponent(self.n)
    }

    fn rhs(&self, t_piece: f64, y: f64) -> f64 {
        -self.gamma * y + self.f.eval(t_piece) * y.max(0.0).powf(self.omega()) + self.g.eval(t_piece)
    }
}

/// `4 (4^{alpha_n} 2^{beta_n} y0 e^{-theta_n gamma (t-tau)} + Q(gamma/2, A1, A2)^{beta_n})`
pub fn gron1_bound(inst: &GronwallInstance, t: f64) -> Result<f64> {
    if t < inst.tau {
        return Err(invalid("t", "precedes tau"));
    }
    let closed = sequence_params(inst.n);
    let (alpha, beta, theta_closed) = closed.to_f64();
    let theta = match inst.theta0 {
        ThetaZero::One => theta_closed,
        ThetaZero::Half => theta_closed / 2.0,
    };
    let q = q_value(inst.gamma / 2.0, inst.a1, inst.a2)?;
    Ok(4.0
        * (4f64.powf(alpha) * 2f64.powf(beta) * inst.y0 * (-theta * inst.gamma * (t - inst.tau)).exp()
            + q.powf(beta)))
}

/// Dormand–Prince 5(4) step for a scalar ODE; returns the 5th-order value
/// and the embedded error estimate.
fn dp45_step(rhs: &impl Fn(f64, f64) -> f64, t: f64, y: f64, h: f64) -> (f64, f64) {
    let k1 = rhs(t, y);
    let k2 = rhs(t + h / 5.0, y + h * (k1 / 5.0));
    let k3 = rhs(t + 3.0 * h / 10.0, y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
    let k4 = rhs(t + 4.0 * h / 5.0, y + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
    let k5 = rhs(
        t + 8.0 * h / 9.0,
        y + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 + 64448.0 / 6561.0 * k3 - 212.0 / 729.0 * k4),
    );
    let k6 = rhs(
        t + h,
        y + h
            * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 + 46732.0 / 5247.0 * k3 + 49.0 / 176.0 * k4
                - 5103.0 / 18656.0 * k5),
    );
    let y5 = y + h
        * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 - 2187.0 / 6784.0 * k5
            + 11.0 / 84.0 * k6);
    let k7 = rhs(t + h, y5);
    let y4 = y + h
        * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 + 393.0 / 640.0 * k4 - 92097.0 / 339200.0 * k5
            + 187.0 / 2100.0 * k6
            + 1.0 / 40.0 * k7);
    (y5, y5 - y4)
}

pub const ODE_RTOL: f64 = 1e-10;
const ODE_ATOL: f64 = 1e-12;

/// Integrates `y' = rhs(t, y)` on `[t0, t1]` adaptively, calling `visit` at
/// every accepted point.
fn integrate_smooth(
    rhs: &impl Fn(f64, f64) -> f64,
    t0: f64,
    t1: f64,
    y0: f64,
    mut visit: impl FnMut(f64, f64),
) -> Result<f64> {
    let (mut t, mut y) = (t0, y0);
    let mut h = ((t1 - t0) / 16.0).max(1e-6);
    let mut guard = 0usize;
    while t < t1 {
        guard += 1;
        if guard > 1_000_000 {
            return Err(ChdError::Degenerate(format!("ode step budget exhausted at t = {t}")));
        }
        h = h.min(t1 - t);
        let (y_new, err) = dp45_step(rhs, t, y, h);
        let scale = ODE_ATOL + ODE_RTOL * y.abs().max(y_new.abs());
        let ratio = err.abs() / scale;
        if !y_new.is_finite() {
            return Err(ChdError::Degenerate(format!("non-finite ode state at t = {t}")));
        }
        if ratio <= 1.0 {
            t = if t1 - (t + h) < 1e-14 * t1.abs().max(1.0) { t1 } else { t + h };
            y = y_new;
            visit(t, y);
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 {
            return Err(ChdError::Degenerate(format!("ode step underflow at t = {t}")));
        }
    }
    Ok(y)
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    /// `max y(t) / bound(t)` over all checked points.
    pub max_ratio: f64,
    /// Time of the largest ratio.
    pub witness_t: f64,
    pub checked_points: usize,
    pub passed: bool,
    /// Largest `kernel integral / (kernel constant * window sup)` for f and g.
    pub kernel_ratio: f64,
    pub kernel_passed: bool,
}

/// Integrates `y' = -gamma y + f y^{a_n} + g` from `y0` and compares with
/// [`gron1_bound`] at every accepted ODE point and at `samples` uniform
/// times. Also checks the exponential-kernel bound for `f` and `g`.
pub fn verify_instance(inst: &GronwallInstance, samples: usize) -> Result<VerificationReport> {
    inst.validate()?;
    let mut cuts: Vec<f64> = inst
        .f
        .breaks()
        .into_iter()
        .chain(inst.g.breaks())
        .chain((0..=samples).map(|k| inst.tau + (inst.horizon - inst.tau) * k as f64 / samples.max(1) as f64))
        .filter(|t| *t > inst.tau && *t < inst.horizon)
        .collect();
    cuts.push(inst.horizon);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut max_ratio: f64 = 0.0;
    let mut witness_t = inst.tau;
    let mut checked = 0usize;
    let mut failure: Option<ChdError> = None;
    let mut check = |t: f64, y: f64| match gron1_bound(inst, t) {
        Ok(b) => {
            checked += 1;
            if y / b > max_ratio {
                max_ratio = y / b;
                witness_t = t;
            }
        }
        Err(e) => failure = Some(e),
    };
    check(inst.tau, inst.y0);
    let (mut t, mut y) = (inst.tau, inst.y0);
    for &next in &cuts {
        // the piece value is sampled at the interval midpoint so the RHS is
        // smooth on each sub-interval
        let mid = 0.5 * (t + next);
        let rhs = |_: f64, y: f64| inst.rhs(mid, y);
        y = integrate_smooth(&rhs, t, next, y, &mut check)?;
        t = next;
    }
    if let Some(e) = failure {
        return Err(e);
    }

    let kc = kernel_constant(inst.gamma);
    let mut kernel_ratio: f64 = 0.0;
    for m in [&inst.f, &inst.g] {
        let sup = m.window_sup();
        for k in 1..=samples.max(1) {
            let tk = inst.tau + (inst.horizon - inst.tau) * k as f64 / samples.max(1) as f64;
            let lhs = m.kernel_integral(inst.gamma, inst.tau, tk);
            if lhs > 0.0 {
                kernel_ratio = kernel_ratio.max(lhs / (kc * sup));
            }
        }
    }
    Ok(VerificationReport {
        max_ratio,
        witness_t,
        checked_points: checked,
        passed: max_ratio <= 1.0 + 1e-9,
        kernel_ratio,
        kernel_passed: kernel_ratio <= 1.0 + 1e-12,
    })
}

/// Parameter ranges of the random instance ensemble.
#[derive(Clone, Debug)]
pub struct EnsembleRanges {
    pub max_n: u32,
    pub gamma: (f64, f64),
    pub a: (f64, f64),
    pub y0: (f64, f64),
    pub horizon: f64,
    /// Pieces per unit time.
    pub pieces_per_unit: usize,
}

impl Default for EnsembleRanges {
    fn default() -> Self {
        Self {
            max_n: 5,
            gamma: (0.5, 2.0),
            a: (0.25, 3.0),
            y0: (1.0, 10.0),
            horizon: 20.0,
            pieces_per_unit: 4,
        }
    }
}

/// Piece values drawn as `U² * cap`, rejected while any unit window ending at
/// the new piece exceeds `bound`; after 32 rejections the remaining budget
/// of the window is drawn uniformly.
fn sample_piecewise(rng: &mut ChaCha8Rng, bound: f64, pieces: usize, per_unit: usize, start: f64) -> PiecewiseConstant {
    let width = 1.0 / per_unit as f64;
    let cap = 2.0 * bound / width;
    let mut values: Vec<f64> = Vec::with_capacity(pieces);
    for i in 0..pieces {
        let lo = (i + 1).saturating_sub(per_unit);
        let window_prev: f64 = values[lo..i].iter().sum::<f64>() * width;
        let budget = ((bound - window_prev) / width).max(0.0);
        let mut chosen = None;
        for _ in 0..32 {
            let u: f64 = rng.random();
            let v = u * u * cap;
            if v <= budget {
                chosen = Some(v);
                break;
            }
        }
        values.push(chosen.unwrap_or_else(|| rng.random_range(0.0..=1.0) * budget));
    }
    PiecewiseConstant::new(start, width, values).expect("valid samples")
}

/// Reproducible random instance from `seed`.
pub fn random_instance(seed: u64, ranges: &EnsembleRanges) -> GronwallInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..=ranges.max_n);
    let gamma = rng.random_range(ranges.gamma.0..=ranges.gamma.1);
    let a1 = rng.random_range(ranges.a.0..=ranges.a.1);
    let a2 = rng.random_range(ranges.a.0..=ranges.a.1);
    let y0 = rng.random_range(ranges.y0.0..=ranges.y0.1);
    let pieces = (ranges.horizon * ranges.pieces_per_unit as f64).round() as usize;
    let f = sample_piecewise(&mut rng, a1, pieces, ranges.pieces_per_unit, 0.0);
    let g = sample_piecewise(&mut rng, a2, pieces, ranges.pieces_per_unit, 0.0);
    GronwallInstance {
        gamma,
        n,
        y0,
        tau: 0.0,
        horizon: ranges.horizon,
        f,
        g,
        a1,
        a2,
        theta0: ThetaZero::One,
    }
}

/// One row of the ensemble report.
#[derive(Clone, Debug)]
pub struct EnsembleRow {
    pub seed: u64,
    pub n: u32,
    pub gamma: f64,
    pub max_ratio: f64,
    pub passed: bool,
    pub kernel_passed: bool,
}

pub const ENSEMBLE_CSV_HEADER: &str = "seed,n,gamma,max_ratio,pass";

impl EnsembleRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.seed,
            self.n,
            crate::snapshot::format_real(self.gamma),
            crate::snapshot::format_real(self.max_ratio),
            if self.passed && self.kernel_passed { "pass" } else { "fail" }
        )
    }
}

/// Verifies `count` instances with seeds `base_seed..base_seed+count`, in parallel.
pub fn verify_ensemble(base_seed: u64, count: usize, ranges: &EnsembleRanges, samples: usize) -> Result<Vec<EnsembleRow>> {
    use rayon::prelude::*;
    (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let seed = base_seed + k;
            let inst = random_instance(seed, ranges);
            let rep = verify_instance(&inst, samples)?;
            Ok(EnsembleRow {
                seed,
                n: inst.n,
                gamma: inst.gamma,
                max_ratio: rep.max_ratio,
                passed: rep.passed,
                kernel_passed: rep.kernel_passed,
            })
        })
        .collect()
}

/// `2 omega y^{1/2} + (1 - 2 omega) - y^omega`, nonnegative for `omega in (0, 1/2)`.
pub fn young_gap(y: f64, omega: f64) -> f64 {
    2.0 * omega * y.sqrt() + (1.0 - 2.0 * omega) - y.powf(omega)
}
