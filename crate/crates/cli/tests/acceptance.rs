//! Acceptance checks for the simulator and harness. Prints one PASS/FAIL
//! line per criterion and exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use chd_core::chemistry::{chemical_potential, energy};
use chd_core::diagnostics::{stationarity_residual, sweep_k1, DiagnosticsRecord};
use chd_core::grid::{gradient, mean};
use chd_core::gronwall::{q_value, sequence_by_recurrence, sequence_params, ThetaZero};
use chd_core::integrator::{run, RunOptions};
use chd_core::pressure::{
    divergence_constraint_residual, pressure_energy_identity_residual, solve_pressure, velocity,
};
use chd_core::steady::constant_state;
use chd_core::{init, snapshot, Field, GridSpec, PhysicsParams, Profile, SimState, SourceModel, StepperConfig};

type Verdict = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e(v: f64) -> String {
    format!("{v:.3e}")
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn run_cli(dir: &Path, name: &str, text: &str) -> Result<HashMap<String, String>, String> {
    let cfg = dir.join(format!("{name}.ini"));
    fs::write(&cfg, text).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_chd-lab"))
        .arg(&cfg)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "chd-lab exited with {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    let report = fs::read_to_string(dir.join(name).join("report.txt")).map_err(|e| e.to_string())?;
    Ok(report
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

fn num(report: &HashMap<String, String>, key: &str) -> Result<f64, String> {
    report
        .get(key)
        .ok_or_else(|| format!("report lacks `{key}`"))?
        .parse()
        .map_err(|_| format!("`{key}` is not a number"))
}

fn nums(report: &HashMap<String, String>, key: &str) -> Result<Vec<f64>, String> {
    report
        .get(key)
        .ok_or_else(|| format!("report lacks `{key}`"))?
        .split(',')
        .map(|s| s.parse().map_err(|_| format!("`{key}` is not a list of numbers")))
        .collect()
}

/// Spinodal decomposition at 128² over 10⁴ steps, with every step recorded.
struct SpinodalRun {
    label: &'static str,
    rows: Vec<DiagnosticsRecord>,
    elapsed: Duration,
}

fn spinodal_runs() -> Result<Vec<SpinodalRun>, String> {
    let g = GridSpec::unit_square(128).map_err(|e| e.to_string())?;
    let params = PhysicsParams::with_eps(0.05).map_err(|e| e.to_string())?;
    let profile = Profile::new(Field::from_fn(g, |x, y| (2.0 * PI * x).cos() * (PI * y).cos())).map_err(|e| e.to_string())?;
    let sources = [
        ("zero", SourceModel::zero(g)),
        ("periodic", SourceModel::periodic(profile, 1.0, 2.0 * PI).map_err(|e| e.to_string())?),
    ];
    let cfg = StepperConfig::new(1e-4).map_err(|e| e.to_string())?;
    let phi0 = init::random_seeded(g, 0.0, 1e-2, 1);
    let mut out = Vec::new();
    for (label, src) in sources {
        let start = Instant::now();
        let s0 = SimState::new(0.0, phi0.clone(), &src, &params, true).map_err(|e| e.to_string())?;
        let tr = run(s0, &src, &cfg, &params, 1.0, &RunOptions::default(), &mut []).map_err(|e| e.to_string())?;
        out.push(SpinodalRun {
            label,
            rows: tr.record.rows,
            elapsed: start.elapsed(),
        });
    }
    Ok(out)
}

fn mass_conservation(runs: &[SpinodalRun]) -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for r in runs {
        let m0 = r.rows[0].mass;
        let drift = r.rows.iter().map(|x| (x.mass - m0).abs()).fold(0.0, f64::max);
        ok &= drift <= 1e-10 && r.rows.len() == 10_001 && r.elapsed <= Duration::from_secs(120);
        parts.push(format!("{}: max drift {} over {} rows in {}", r.label, e(drift), r.rows.len(), secs(r.elapsed)));
    }
    check(ok, format!("{} (tol 1e-10, limit 120s per run)", parts.join("; ")))
}

fn divergence_constraint(runs: &[SpinodalRun]) -> Verdict {
    let mut worst = 0.0f64;
    for r in runs {
        for x in &r.rows {
            worst = worst.max(x.div_residual / (1.0 + x.s_sq.sqrt()));
        }
    }
    check(worst <= 1e-8, format!("max ‖div u - S‖/(1+‖S‖) = {} (tol 1e-8)", e(worst)))
}

fn pressure_identities() -> Verdict {
    let g = GridSpec::unit_square(32).map_err(|e| e.to_string())?;
    let params = PhysicsParams::new(0.1, 0.7).map_err(|e| e.to_string())?;
    let kappa = params.coupling();
    let (a, b) = (0.3, 0.7);
    let phi = Field::from_fn(g, |x, y| a * (PI * x).cos() * (PI * y).cos());
    let mu = Field::from_fn(g, |x, _| b * (PI * x).cos());
    let p_star = Field::from_fn(g, |x, y| (PI * x).cos() * (PI * y).cos());
    let s = Field::from_fn(g, |x, y| {
        2.0 * PI * PI * (PI * x).cos() * (PI * y).cos()
            - kappa * a * b * PI * PI * (PI * y).cos() * (1.5 * (2.0 * PI * x).cos() + 0.5)
    });
    let p = solve_pressure(&phi, &mu, &s, &params).map_err(|e| e.to_string())?;
    let recovery = p.sub(&p_star).l2_norm();

    let g2 = GridSpec::new(32, 24, 1.0, 0.8).map_err(|e| e.to_string())?;
    let mut worst_identity = 0.0f64;
    let mut worst_div = 0.0f64;
    for seed in 0..50 {
        let phi = init::rough(g2, 0.1, 1.0, 1.5, seed).map_err(|e| e.to_string())?;
        let mu = chemical_potential(&phi, &params);
        let raw = init::rough(g2, 0.0, 2.0, 1.0, 1000 + seed).map_err(|e| e.to_string())?;
        let s = raw.map(|v| v - mean(&raw));
        let p = solve_pressure(&phi, &mu, &s, &params).map_err(|e| e.to_string())?;
        let grad_p_sq = gradient(&p).l2_norm_sq();
        let r = pressure_energy_identity_residual(&p, &s, &mu, &phi, &params);
        worst_identity = worst_identity.max(r / (1.0 + grad_p_sq));
        let u = velocity(&p, &mu, &phi, &params);
        worst_div = worst_div.max(divergence_constraint_residual(&u, &s) / (1.0 + s.l2_norm()));
    }
    check(
        recovery <= 1e-10 && worst_identity <= 1e-9 && worst_div <= 1e-8,
        format!(
            "manufactured L2 error {} (tol 1e-10); identity residual/(1+‖∇p‖²) {} over 50 states (tol 1e-9); div residual {}",
            e(recovery),
            e(worst_identity),
            e(worst_div)
        ),
    )
}

fn energy_dissipation(runs: &[SpinodalRun]) -> Verdict {
    let zero = &runs[0];
    let max_inc = zero
        .rows
        .windows(2)
        .map(|w| w[1].energy - w[0].energy)
        .fold(f64::NEG_INFINITY, f64::max);

    let g = GridSpec::unit_square(32).map_err(|e| e.to_string())?;
    let params = PhysicsParams::with_eps(0.1).map_err(|e| e.to_string())?;
    let profile = Profile::new(Field::from_fn(g, |x, y| (PI * x).cos() * (2.0 * PI * y).cos())).map_err(|e| e.to_string())?;
    let src = SourceModel::separable_decay(profile, 2.0, 0.5).map_err(|e| e.to_string())?;
    let dt = 1e-3;
    let s0 = SimState::new(0.0, init::random_seeded(g, 0.0, 0.05, 2), &src, &params, true).map_err(|e| e.to_string())?;
    let tr = run(s0, &src, &StepperConfig::new(dt).map_err(|e| e.to_string())?, &params, 2.0, &RunOptions::default(), &mut [])
        .map_err(|e| e.to_string())?;
    let rows = &tr.record.rows;
    let within = |values: &[f64]| {
        values
            .windows(2)
            .zip(&rows[1..])
            .all(|(w, r)| w[1] - w[0] <= 10.0 * dt * (1.0 + r.s_sq))
    };
    let rep = sweep_k1(&tr.record, &src, 1.0, 20, |rep| within(&rep.values)).map_err(|e| e.to_string())?;
    let tilde_ok = within(&rep.values);
    check(
        max_inc <= 0.0 && tilde_ok,
        format!(
            "S=0: max energy increment {} over {} steps (tol 0); decaying S: K1 = {}, max modified-energy increment {} (bound 10 dt (1+‖S‖²))",
            e(max_inc),
            zero.rows.len() - 1,
            rep.k1,
            e(rep.max_increment)
        ),
    )
}

fn energy_law_order() -> Verdict {
    let g = GridSpec::unit_square(32).map_err(|e| e.to_string())?;
    let params = PhysicsParams::with_eps(0.1).map_err(|e| e.to_string())?;
    let profile = Profile::new(Field::from_fn(g, |x, y| (PI * x).cos() * (2.0 * PI * y).cos())).map_err(|e| e.to_string())?;
    let src = SourceModel::separable_decay(profile, 1.0, 0.5).map_err(|e| e.to_string())?;
    let phi0 = Field::from_fn(g, |x, y| 0.1 + 0.3 * (PI * x).cos() * (PI * y).cos() + 0.2 * (2.0 * PI * x).cos());
    let mut residuals = Vec::new();
    for dt in [4e-4, 2e-4, 1e-4] {
        let s0 = SimState::new(0.0, phi0.clone(), &src, &params, true).map_err(|e| e.to_string())?;
        let tr = run(s0, &src, &StepperConfig::new(dt).map_err(|e| e.to_string())?, &params, 0.1, &RunOptions::default(), &mut [])
            .map_err(|e| e.to_string())?;
        residuals.push(
            tr.record
                .rows
                .iter()
                .filter_map(|r| r.energy_law_residual)
                .fold(0.0, f64::max),
        );
    }
    let r1 = residuals[0] / residuals[1];
    let r2 = residuals[1] / residuals[2];
    let ok = (1.7..=2.3).contains(&r1) && (1.7..=2.3).contains(&r2);
    check(
        ok,
        format!(
            "max residuals {} / {} / {}, ratios {:.3} and {:.3} (range [1.7, 2.3])",
            e(residuals[0]),
            e(residuals[1]),
            e(residuals[2]),
            r1,
            r2
        ),
    )
}

fn smoothing() -> Verdict {
    let g = GridSpec::unit_square(64).map_err(|e| e.to_string())?;
    let params = PhysicsParams::with_eps(0.1).map_err(|e| e.to_string())?;
    let src = SourceModel::zero(g);
    let phi0 = init::rough(g, 0.6, 1.0, 0.6, 5).map_err(|e| e.to_string())?;
    let s0 = SimState::new(0.0, phi0, &src, &params, true).map_err(|e| e.to_string())?;
    let opts = RunOptions {
        diagnostics_every: 10,
        ..RunOptions::default()
    };
    let tr = run(s0, &src, &StepperConfig::new(1e-4).map_err(|e| e.to_string())?, &params, 1.0, &opts, &mut [])
        .map_err(|e| e.to_string())?;
    let weighted = |r: &DiagnosticsRecord| r.t * r.lap_norm * r.lap_norm;
    let reference = tr
        .record
        .rows
        .iter()
        .find(|r| (r.t - 0.1).abs() < 1e-9)
        .map(weighted)
        .ok_or("no sample at t = 0.1")?;
    let sup = tr
        .record
        .rows
        .iter()
        .filter(|r| r.t > 0.0)
        .map(weighted)
        .fold(0.0, f64::max);
    let ratio = sup / reference;
    check(
        ratio <= 10.0,
        format!("sup t‖Δφ‖² = {}, value at t = 0.1 is {}, ratio {:.3} (limit 10)", e(sup), e(reference), ratio),
    )
}

const STEADY: &str = "\
[grid]
nx = 128
ny = 128

[physics]
eps = 0.05

[initial]
kind = modes
mass = 0
modes = 1:0:0.01

[stepper]
dt = 1e-2

[run]
output_dir = steady

[experiment]
kind = steady
tol = 1e-8
max_time = 50
check_every = 10
";

fn steady_states(dir: &Path) -> Verdict {
    let g = GridSpec::unit_square(128).map_err(|e| e.to_string())?;
    let params = PhysicsParams::with_eps(0.05).map_err(|e| e.to_string())?;
    let const_res = [0.0, 0.8, -0.3]
        .iter()
        .map(|m| stationarity_residual(&constant_state(*m, g), &params))
        .fold(0.0, f64::max);
    let report = run_cli(dir, "steady", STEADY)?;
    let residual = num(&report, "residual")?;
    let e_inf = num(&report, "energy")?;
    let e_zero = energy(&Field::zeros(g), &params);
    let (phi, _) = snapshot::read(&dir.join("steady/steady.chdfield")).map_err(|e| e.to_string())?;
    let mu = chemical_potential(&phi, &params);
    let mu_mean = mean(&mu);
    let spread = mu.values().iter().map(|v| (v - mu_mean).abs()).fold(0.0, f64::max);
    check(
        const_res == 0.0 && residual < 1e-8 && e_inf < e_zero && spread <= 1e-7 && mean(&phi).abs() <= 1e-12,
        format!(
            "constant residual {}; φ∞ residual {} (tol 1e-8), E(φ∞) = {:.6} < E(0) = {}, max |μ - mean μ| = {} (tol 1e-7)",
            const_res,
            e(residual),
            e_inf,
            e_zero,
            e(spread)
        ),
    )
}

const RATE: &str = "\
[grid]
nx = 64
ny = 64

[physics]
eps = 0.1

[initial]
kind = random-seeded
mass = 0.8
amplitude = 0.05
seed = 3

[source]
variant = separable-decay
amplitude = 1
rho = 0.5
profile_modes = 1:0:1, 1:1:0.5

[stepper]
dt = 0.05

[run]
t_end = 200
diagnostics_every = 20
output_dir = rate

[experiment]
kind = rate
target = constant
target_mass = 0.8
fit_start = 10
fit_end = 200
";

fn convergence_rate(dir: &Path) -> Verdict {
    let start = Instant::now();
    let report = run_cli(dir, "rate", RATE)?;
    let elapsed = start.elapsed();
    let lambda = num(&report, "lambda_hat")?;
    let r2 = num(&report, "r_squared")?;
    check(
        lambda >= 0.20 && r2 >= 0.95 && elapsed <= Duration::from_secs(300),
        format!(
            "λ̂ = {lambda:.4} (min 0.20), R² = {r2:.6} (min 0.95), {} samples, {} (limit 300s)",
            report.get("fit_samples").map(String::as_str).unwrap_or("?"),
            secs(elapsed)
        ),
    )
}

const DEPENDENCE: &str = "\
[grid]
nx = 64
ny = 64

[physics]
eps = 0.1

[initial]
kind = modes
mass = 0.2
modes = 1:1:0.3

[stepper]
dt = 1e-3

[run]
t_end = 1
output_dir = dependence

[experiment]
kind = dependence
deltas = 1e-2, 1e-3, 1e-4
direction_modes = 2:1:1, 0:3:0.5
";

fn continuous_dependence(dir: &Path) -> Verdict {
    let report = run_cli(dir, "dependence", DEPENDENCE)?;
    let ratios = nums(&report, "ratios")?;
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let spread = hi / lo - 1.0;
    check(
        ratios.len() == 3 && ratios.iter().all(|r| r.is_finite() && *r > 0.0) && spread <= 0.10,
        format!(
            "ratios {} with spread {:.2e} (limit 10%)",
            ratios.iter().map(|r| format!("{r:.5}")).collect::<Vec<_>>().join(", "),
            spread
        ),
    )
}

const PULLBACK: &str = "\
[grid]
nx = 32
ny = 32
lx = 3.141592653589793
ly = 3.141592653589793

[physics]
eps = 0.1

[initial]
kind = random-seeded
mass = 0.8
amplitude = 0.05
seed = 11

[source]
variant = periodic
amplitude = 0.5
omega = 1
profile_modes = 1:1:1

[stepper]
dt = 0.01

[run]
output_dir = pullback

[experiment]
kind = pullback
back_times = 5, 10, 20, 40
t_star = 0
scalings = 1, 3, 10
";

fn pullback(dir: &Path) -> Verdict {
    let report = run_cli(dir, "pullback", PULLBACK)?;
    let d = nums(&report, "pairwise_h2")?;
    let spread = num(&report, "scaling_spread")?;
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    let last = *d.last().ok_or("no pairwise distances")?;
    check(
        d.len() == 3 && decreasing && last <= 1e-4 && spread <= 0.05,
        format!(
            "pairwise H² distances {} (decreasing, final ≤ 1e-4); H¹ scaling spread {} (limit 5%)",
            d.iter().map(|v| e(*v)).collect::<Vec<_>>().join(", "),
            e(spread)
        ),
    )
}

fn gronwall(dir: &Path) -> Verdict {
    let start = Instant::now();
    let exact = (0..=20).all(|n| sequence_params(n) == sequence_by_recurrence(n, ThetaZero::One));
    let mut q_err = 0.0f64;
    for (a1, a2) in [(0.0, 1.0), (1.0, 0.0), (0.7, 2.3), (3.0, 0.25)] {
        let q = q_value(2.0 * LN_2, a1, a2).map_err(|e| e.to_string())?;
        let closed = 16.0 * a1 * a1 + 32.0 / 3.0 * a2;
        q_err = q_err.max((q - closed).abs() / closed);
    }
    let report = run_cli(
        dir,
        "gronwall",
        "[run]\noutput_dir = gronwall\n\n[experiment]\nkind = gronwall-verify\nseed = 0\ncount = 200\nsamples = 400\n",
    )?;
    let csv = fs::read_to_string(dir.join("gronwall/gronwall.csv")).map_err(|e| e.to_string())?;
    let rows = csv.lines().skip(1).count();
    let violations = num(&report, "violations")?;
    let worst = num(&report, "worst_ratio")?;
    let elapsed = start.elapsed();
    check(
        exact && q_err <= 1e-12 && rows == 200 && violations == 0.0 && elapsed <= Duration::from_secs(60),
        format!(
            "closed forms = recurrences for n ≤ 20: {exact}; Q(2 ln 2) relative error {}; {rows} instances, {violations} violations (bound and kernel), worst ratio {worst:.4}; {} (limit 60s)",
            e(q_err),
            secs(elapsed)
        ),
    )
}

const DETERMINISM: &str = "\
[grid]
nx = 32
ny = 32

[physics]
eps = 0.05

[initial]
kind = random-seeded
mass = 0.1
amplitude = 0.1
seed = 77

[source]
variant = periodic
amplitude = 0.5
omega = 3
profile_modes = 1:2:1, 3:0:0.3

[stepper]
dt = 1e-3

[run]
t_end = 0.3
snapshot_every = 100
diagnostics_every = 5
psi1_c5 = 1
psi1_c9 = 0.5
output_dir = OUT

[experiment]
kind = simulate
";

fn determinism(dir: &Path) -> Verdict {
    let mut csvs = Vec::new();
    let mut snaps = Vec::new();
    for name in ["det_a", "det_b"] {
        run_cli(dir, name, &DETERMINISM.replace("OUT", name))?;
        csvs.push(fs::read(dir.join(name).join("diagnostics.csv")).map_err(|e| e.to_string())?);
        snaps.push(fs::read(dir.join(name).join("snapshots/000300.chdfield")).map_err(|e| e.to_string())?);
    }
    check(
        csvs[0] == csvs[1] && snaps[0] == snaps[1],
        format!(
            "diagnostics.csv ({} bytes) identical: {}; final snapshot identical: {}",
            csvs[0].len(),
            csvs[0] == csvs[1],
            snaps[0] == snaps[1]
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let dir = dir.path();
    let spinodal = spinodal_runs();
    let with_runs = |f: fn(&[SpinodalRun]) -> Verdict| -> Verdict {
        match &spinodal {
            Ok(runs) => f(runs),
            Err(e) => Err(format!("spinodal runs failed: {e}")),
        }
    };

    let criteria: Vec<Criterion> = vec![
        ("mass conservation", Box::new(|| with_runs(mass_conservation))),
        ("divergence constraint", Box::new(|| with_runs(divergence_constraint))),
        ("pressure identities", Box::new(pressure_identities)),
        ("energy dissipation", Box::new(|| with_runs(energy_dissipation))),
        ("energy-law residual order", Box::new(energy_law_order)),
        ("smoothing", Box::new(smoothing)),
        ("steady states", Box::new(|| steady_states(dir))),
        ("convergence rate", Box::new(|| convergence_rate(dir))),
        ("continuous dependence", Box::new(|| continuous_dependence(dir))),
        ("pullback convergence", Box::new(|| pullback(dir))),
        ("gronwall appendix", Box::new(|| gronwall(dir))),
        ("determinism", Box::new(|| determinism(dir))),
    ];

    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
