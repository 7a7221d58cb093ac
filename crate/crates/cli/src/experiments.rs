//! Experiment drivers. Each writes its outputs below `run.output_dir`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chd_core::diagnostics::{rate_fit, write_csv, DiagnosticsOptions, DiagnosticsRecord, CSV_HEADER};
use chd_core::error::IntegrationFailure;
use chd_core::grid::mean;
use chd_core::gronwall::{verify_ensemble, ENSEMBLE_CSV_HEADER};
use chd_core::integrator::{run, step_count, Observer, RunOptions};
use chd_core::probes::{continuous_dependence_probe, pullback_probe};
use chd_core::snapshot::{self, format_real};
use chd_core::steady::{solve_stationary_with, SteadyConfig};
use chd_core::{ChdError, Field, SimState, SourceModel, TrajectoryRecord};

use crate::config::{Experiment, Model, RateTarget, RunConfig};
use crate::error::LabError;

/// Files written by an experiment and a short human-readable summary.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<(String, String)>,
}

impl Outcome {
    fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    fn report_text(&self, kind: &str) -> String {
        let mut s = format!("experiment = {kind}\n");
        for (k, v) in &self.summary {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, LabError> {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), LabError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| LabError::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn diagnostics(&mut self, record: &TrajectoryRecord) -> Result<(), LabError> {
        let path = self.dir.join("diagnostics.csv");
        let file = fs::File::create(&path).map_err(|e| LabError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        write_csv(&mut w, record)
            .and_then(|_| w.flush())
            .map_err(|e| LabError::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn snapshot(&mut self, name: &str, field: &Field, t: f64) -> Result<(), LabError> {
        let path = self.dir.join(name);
        snapshot::write(&path, field, t).map_err(|e| LabError::core(format!("writing {}", path.display()), e))?;
        self.files.push(path);
        Ok(())
    }
}

/// Writes `snapshots/NNNNNN.chdfield` every `every` steps and at the last step.
struct SnapshotWriter {
    dir: PathBuf,
    every: usize,
    last: usize,
    written: Vec<PathBuf>,
}

impl Observer for SnapshotWriter {
    fn observe(&mut self, step: usize, state: &SimState, _: Option<&DiagnosticsRecord>) -> chd_core::Result<()> {
        if step.is_multiple_of(self.every) || step == self.last {
            let path = self.dir.join(format!("{step:06}.chdfield"));
            snapshot::write(&path, state.phi(), state.t())?;
            self.written.push(path);
        }
        Ok(())
    }
}

fn model(cfg: &RunConfig) -> &Model {
    cfg.model.as_ref().expect("simulating experiments carry a model")
}

fn initial_state(m: &Model) -> Result<SimState, LabError> {
    SimState::new(0.0, m.initial.clone(), &m.source, &m.params, m.stepper.dealias)
        .map_err(|e| LabError::core("initial state", e))
}

fn diagnostics_options(cfg: &RunConfig) -> DiagnosticsOptions {
    let mut opts = DiagnosticsOptions::default();
    opts.k1 = cfg.run.k1;
    opts.psi1 = cfg.run.psi1;
    opts
}

/// Runs the configured trajectory, streaming snapshots, and writes
/// `diagnostics.csv` even when the run fails part way.
fn simulate_into(
    cfg: &RunConfig,
    out: &mut Output,
    opts: DiagnosticsOptions,
    outcome: &mut Outcome,
) -> Result<(TrajectoryRecord, SimState), LabError> {
    let m = model(cfg);
    let state0 = initial_state(m)?;
    let run_opts = RunOptions {
        diagnostics_every: cfg.run.diagnostics_every,
        diagnostics: opts,
    };
    let mut snaps = SnapshotWriter {
        dir: out.dir.join("snapshots"),
        every: cfg.run.snapshot_every.max(1),
        last: step_count(0.0, cfg.run.t_end, m.stepper.dt),
        written: Vec::new(),
    };
    let mut observers: Vec<&mut dyn Observer> = Vec::new();
    if cfg.run.snapshot_every > 0 {
        observers.push(&mut snaps);
    }
    let result = run(state0, &m.source, &m.stepper, &m.params, cfg.run.t_end, &run_opts, &mut observers);
    out.files.append(&mut snaps.written);
    match result {
        Ok(tr) => {
            out.diagnostics(&tr.record)?;
            summarize_record(&tr.record, outcome);
            Ok((tr.record, tr.state))
        }
        Err(ChdError::Integration(fail)) => {
            let IntegrationFailure { t, partial, .. } = &*fail;
            out.diagnostics(partial)?;
            outcome.note("status", "integration failure");
            outcome.note("failure_time", format_real(*t));
            summarize_record(partial, outcome);
            out.write("report.txt", &outcome.report_text(cfg.experiment.name()))?;
            Err(LabError::core("time integration", ChdError::Integration(fail)))
        }
        Err(e) => Err(LabError::core("time integration", e)),
    }
}

fn summarize_record(record: &TrajectoryRecord, outcome: &mut Outcome) {
    let Some(first) = record.rows.first() else {
        return;
    };
    let last = record.rows.last().expect("nonempty");
    let mass_drift = record.rows.iter().map(|r| (r.mass - first.mass).abs()).fold(0.0, f64::max);
    let max_increment = record
        .rows
        .windows(2)
        .map(|w| w[1].energy - w[0].energy)
        .fold(f64::NEG_INFINITY, f64::max);
    let div = record.rows.iter().map(|r| r.div_residual).fold(0.0, f64::max);
    outcome.note("rows", record.len());
    outcome.note("final_time", format_real(last.t));
    outcome.note("final_energy", format_real(last.energy));
    outcome.note("max_mass_drift", format_real(mass_drift));
    if record.len() > 1 {
        outcome.note("max_energy_increment", format_real(max_increment));
    }
    outcome.note("max_div_residual", format_real(div));
    if let Some(r) = record.rows.iter().filter_map(|r| r.energy_law_residual).reduce(f64::max) {
        outcome.note("max_energy_law_residual", format_real(r));
    }
}

/// Runs the experiment selected by `cfg`.
pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, LabError> {
    let mut out = Output::new(&cfg.run.output_dir)?;
    let mut outcome = Outcome::default();
    let kind = cfg.experiment.name();
    let result = match &cfg.experiment {
        Experiment::Simulate => simulate(cfg, &mut out, &mut outcome),
        Experiment::Steady {
            tol,
            max_time,
            check_every,
        } => steady(cfg, *tol, *max_time, *check_every, &mut out, &mut outcome),
        Experiment::Rate {
            target,
            fit_start,
            fit_end,
        } => rate(cfg, target, *fit_start, *fit_end, &mut out, &mut outcome),
        Experiment::Pullback {
            back_times,
            t_star,
            scalings,
        } => pullback(cfg, back_times, *t_star, scalings, &mut out, &mut outcome),
        Experiment::Dependence { deltas, direction } => dependence(cfg, deltas, direction, &mut out, &mut outcome),
        Experiment::GronwallVerify {
            seed,
            count,
            samples,
            ranges,
        } => gronwall(*seed, *count, *samples, ranges, &mut out, &mut outcome),
    };
    if result.is_ok() {
        outcome.note("status", "ok");
    }
    // failures that already wrote a report keep it; others get one here
    let report_written = out.files.iter().any(|p| p.ends_with("report.txt"));
    if !report_written {
        if let Err(e) = &result {
            outcome.note("status", format!("error: {e}"));
        }
        out.write("report.txt", &outcome.report_text(kind))?;
    }
    result?;
    outcome.files = out.files;
    Ok(outcome)
}

fn simulate(cfg: &RunConfig, out: &mut Output, outcome: &mut Outcome) -> Result<(), LabError> {
    simulate_into(cfg, out, diagnostics_options(cfg), outcome)?;
    Ok(())
}

fn steady(
    cfg: &RunConfig,
    tol: f64,
    max_time: f64,
    check_every: usize,
    out: &mut Output,
    outcome: &mut Outcome,
) -> Result<(), LabError> {
    let m = model(cfg);
    let mass = mean(&m.initial);
    let scfg = SteadyConfig {
        stepper: m.stepper,
        check_every,
    };
    let solved = solve_stationary_with(mass, &m.initial, &m.params, tol, max_time, &scfg);
    let st = match solved {
        Ok(st) => st,
        Err(ChdError::NonConvergence(nc)) => {
            out.snapshot("steady_best.chdfield", &nc.best, nc.t)?;
            outcome.note("best_residual", format_real(nc.residual));
            return Err(LabError::core("stationary solve", ChdError::NonConvergence(nc)));
        }
        Err(e) => return Err(LabError::core("stationary solve", e)),
    };
    let zero = SourceModel::zero(m.grid);
    let mut record = TrajectoryRecord::default();
    let mut rows = vec![(0.0, &m.initial)];
    if st.steps > 0 {
        rows.push((st.t, &st.phi));
    }
    for (t, phi) in rows {
        let s = SimState::new(t, phi.clone(), &zero, &m.params, m.stepper.dealias)
            .map_err(|e| LabError::core("diagnostics", e))?;
        let row = DiagnosticsRecord::compute(&s, &zero, &m.params, None, &diagnostics_options(cfg))
            .map_err(|e| LabError::core("diagnostics", e))?;
        record.push(row);
    }
    out.diagnostics(&record)?;
    out.snapshot("steady.chdfield", &st.phi, st.t)?;
    let meta = serde_json::json!({
        "residual": st.residual,
        "energy": st.energy,
        "mass": st.mass,
        "iterations": st.steps,
        "flow_time": st.t,
        "tol": tol,
    });
    out.write("steady.json", &format!("{}\n", serde_json::to_string_pretty(&meta).expect("json")))?;
    outcome.note("residual", format_real(st.residual));
    outcome.note("energy", format_real(st.energy));
    outcome.note("initial_energy", format_real(record.rows[0].energy));
    outcome.note("mass", format_real(st.mass));
    outcome.note("iterations", st.steps);
    outcome.note("flow_time", format_real(st.t));
    Ok(())
}

fn rate(
    cfg: &RunConfig,
    target: &RateTarget,
    fit_start: f64,
    fit_end: f64,
    out: &mut Output,
    outcome: &mut Outcome,
) -> Result<(), LabError> {
    let m = model(cfg);
    let target_field = match target {
        RateTarget::Constant(c) => Field::constant(m.grid, *c),
        RateTarget::Field(f) => f.clone(),
        RateTarget::Steady { tol, max_time } => {
            let scfg = SteadyConfig {
                stepper: m.stepper,
                check_every: 10,
            };
            solve_stationary_with(mean(&m.initial), &m.initial, &m.params, *tol, *max_time, &scfg)
                .map_err(|e| LabError::core("rate target", e))?
                .phi
        }
    };
    out.snapshot("target.chdfield", &target_field, 0.0)?;
    let opts = diagnostics_options(cfg).with_target(&target_field);
    let (record, _) = simulate_into(cfg, out, opts, outcome)?;
    let (times, dists): (Vec<f64>, Vec<f64>) = record
        .rows
        .iter()
        .filter(|r| r.t >= fit_start && r.t <= fit_end)
        .filter_map(|r| r.hm1_distance.map(|d| (r.t, d)))
        .unzip();
    outcome.note("fit_start", format_real(fit_start));
    outcome.note("fit_end", format_real(fit_end.min(cfg.run.t_end)));
    outcome.note("fit_samples", times.len());
    let fit = rate_fit(&times, &dists).map_err(|e| LabError::core("rate fit", e))?;
    outcome.note("lambda_hat", format_real(fit.lambda));
    outcome.note("log_c", format_real(fit.log_c));
    outcome.note("r_squared", format_real(fit.r_squared));
    Ok(())
}

fn pullback(
    cfg: &RunConfig,
    back_times: &[f64],
    t_star: f64,
    scalings: &[f64],
    out: &mut Output,
    outcome: &mut Outcome,
) -> Result<(), LabError> {
    let m = model(cfg);
    let rep = pullback_probe(&m.initial, &m.source, back_times, t_star, scalings, &m.stepper, &m.params)
        .map_err(|e| LabError::core("pullback probe", e))?;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for (k, field) in rep.terminal.iter().enumerate() {
        let s = SimState::new(t_star, field.clone(), &m.source, &m.params, m.stepper.dealias)
            .map_err(|e| LabError::core("diagnostics", e))?;
        let row = DiagnosticsRecord::compute(&s, &m.source, &m.params, None, &diagnostics_options(cfg))
            .map_err(|e| LabError::core("diagnostics", e))?;
        csv.push_str(&row.csv_row());
        csv.push('\n');
        out.snapshot(&format!("snapshots/pullback_{k:02}.chdfield"), field, t_star)?;
    }
    out.write("diagnostics.csv", &csv)?;
    let list = |v: &[f64]| v.iter().map(|x| format_real(*x)).collect::<Vec<_>>().join(",");
    outcome.note("t_star", format_real(t_star));
    outcome.note("back_times", list(back_times));
    outcome.note("pairwise_h2", list(&rep.pairwise_h2));
    outcome.note("terminal_h1", list(&rep.terminal_h1));
    let scaled: Vec<f64> = rep.scaled_terminal_h1.iter().map(|p| p.1).collect();
    outcome.note("scalings", list(scalings));
    outcome.note("scaled_terminal_h1", list(&scaled));
    outcome.note("scaling_spread", format_real(rep.scaling_spread()));
    Ok(())
}

fn dependence(
    cfg: &RunConfig,
    deltas: &[f64],
    direction: &Field,
    out: &mut Output,
    outcome: &mut Outcome,
) -> Result<(), LabError> {
    let m = model(cfg);
    let rep = continuous_dependence_probe(&m.initial, direction, deltas, &m.source, &m.stepper, &m.params, cfg.run.t_end)
        .map_err(|e| LabError::core("dependence probe", e))?;
    let mut csv = String::from("delta,ratio,grad_mu_integral,velocity_integral\n");
    for e in &rep.entries {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            format_real(e.delta),
            format_real(e.ratio),
            format_real(e.grad_mu_integral),
            format_real(e.velocity_integral)
        );
    }
    out.write("dependence.csv", &csv)?;
    outcome.note("horizon", format_real(rep.horizon));
    outcome.note(
        "ratios",
        rep.entries.iter().map(|e| format_real(e.ratio)).collect::<Vec<_>>().join(","),
    );
    outcome.note("ratio_spread", format_real(rep.ratio_spread()));
    Ok(())
}

fn gronwall(
    seed: u64,
    count: usize,
    samples: usize,
    ranges: &chd_core::gronwall::EnsembleRanges,
    out: &mut Output,
    outcome: &mut Outcome,
) -> Result<(), LabError> {
    let rows = verify_ensemble(seed, count, ranges, samples).map_err(|e| LabError::core("gronwall ensemble", e))?;
    let mut csv = format!("{ENSEMBLE_CSV_HEADER}\n");
    for r in &rows {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    out.write("gronwall.csv", &csv)?;
    let failures = rows.iter().filter(|r| !(r.passed && r.kernel_passed)).count();
    let worst = rows.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    outcome.note("instances", rows.len());
    outcome.note("violations", failures);
    outcome.note("worst_ratio", format_real(worst));
    if failures > 0 {
        return Err(LabError::Verification(format!("{failures} of {} instances violate the bound", rows.len())));
    }
    Ok(())
}
