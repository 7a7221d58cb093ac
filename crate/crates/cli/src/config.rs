//! Typed run configuration built from an [`IniDoc`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use chd_core::gronwall::EnsembleRanges;
use chd_core::grid::mean;
use chd_core::{init, snapshot, ChdError, Field, GridSpec, PhysicsParams, Profile, SourceModel, StepperConfig};

use crate::error::LabError;
use crate::ini::{IniDoc, Origin};

#[derive(Clone, Debug)]
pub struct RunSection {
    pub t_end: f64,
    /// Snapshot interval in steps; 0 disables snapshots.
    pub snapshot_every: usize,
    pub diagnostics_every: usize,
    pub output_dir: PathBuf,
    pub k1: Option<f64>,
    pub psi1: Option<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub enum RateTarget {
    Constant(f64),
    /// Stationary state reached from the initial data.
    Steady { tol: f64, max_time: f64 },
    Field(Field),
}

#[derive(Clone, Debug)]
pub enum Experiment {
    Simulate,
    Steady {
        tol: f64,
        max_time: f64,
        check_every: usize,
    },
    Rate {
        target: RateTarget,
        fit_start: f64,
        fit_end: f64,
    },
    Pullback {
        back_times: Vec<f64>,
        t_star: f64,
        scalings: Vec<f64>,
    },
    Dependence {
        deltas: Vec<f64>,
        direction: Field,
    },
    GronwallVerify {
        seed: u64,
        count: usize,
        samples: usize,
        ranges: EnsembleRanges,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Steady { .. } => "steady",
            Experiment::Rate { .. } => "rate",
            Experiment::Pullback { .. } => "pullback",
            Experiment::Dependence { .. } => "dependence",
            Experiment::GronwallVerify { .. } => "gronwall-verify",
        }
    }
}

/// Everything needed to build and advance a simulation.
#[derive(Clone, Debug)]
pub struct Model {
    pub grid: GridSpec,
    pub params: PhysicsParams,
    pub initial: Field,
    pub source: SourceModel,
    pub stepper: StepperConfig,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Absent for experiments that do not simulate the field equations.
    pub model: Option<Model>,
    pub run: RunSection,
    pub experiment: Experiment,
}

/// Typed access to an [`IniDoc`] with errors that name the key and its origin.
struct Reader<'a> {
    doc: &'a IniDoc,
    /// Directory against which relative file paths are resolved.
    base: &'a Path,
}

fn key_error(section: &str, key: &str, origin: Option<Origin>, msg: impl Into<String>) -> LabError {
    LabError::Config {
        key: format!("{section}.{key}"),
        origin,
        msg: msg.into(),
    }
}

impl<'a> Reader<'a> {
    fn raw(&self, section: &str, key: &str) -> Option<(&'a str, Origin)> {
        self.doc.get(section, key).map(|e| (e.value.as_str(), e.origin))
    }

    fn origin(&self, section: &str, key: &str) -> Option<Origin> {
        self.raw(section, key).map(|(_, o)| o)
    }

    fn parse<T: FromStr>(&self, section: &str, key: &str, what: &str) -> Result<Option<T>, LabError> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((v, origin)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| key_error(section, key, Some(origin), format!("`{v}` is not {what}"))),
        }
    }

    fn opt_f64(&self, section: &str, key: &str) -> Result<Option<f64>, LabError> {
        let v = self.parse::<f64>(section, key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(key_error(section, key, self.origin(section, key), "must be finite")),
            _ => Ok(v),
        }
    }

    fn f64(&self, section: &str, key: &str) -> Result<f64, LabError> {
        self.opt_f64(section, key)?
            .ok_or_else(|| key_error(section, key, None, "missing required key"))
    }

    fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, LabError> {
        Ok(self.opt_f64(section, key)?.unwrap_or(default))
    }

    fn positive(&self, section: &str, key: &str, default: Option<f64>) -> Result<f64, LabError> {
        let v = match default {
            Some(d) => self.f64_or(section, key, d)?,
            None => self.f64(section, key)?,
        };
        if v > 0.0 {
            Ok(v)
        } else {
            Err(key_error(section, key, self.origin(section, key), format!("must be positive, got {v}")))
        }
    }

    fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize, LabError> {
        Ok(self.parse::<usize>(section, key, "a nonnegative integer")?.unwrap_or(default))
    }

    fn u64(&self, section: &str, key: &str) -> Result<Option<u64>, LabError> {
        self.parse::<u64>(section, key, "a nonnegative integer")
    }

    fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool, LabError> {
        match self.raw(section, key) {
            None => Ok(default),
            Some((v, origin)) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(key_error(section, key, Some(origin), format!("`{v}` is not a boolean"))),
            },
        }
    }

    fn string(&self, section: &str, key: &str) -> Option<&'a str> {
        self.raw(section, key).map(|(v, _)| v)
    }

    fn list_f64(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, LabError> {
        let Some((v, origin)) = self.raw(section, key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| key_error(section, key, Some(origin), format!("`{}` is not a number", s.trim())))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn path(&self, section: &str, key: &str) -> Option<PathBuf> {
        self.string(section, key).map(|p| self.base.join(p))
    }

    fn read_field(&self, section: &str, key: &str, grid: &GridSpec) -> Result<Option<Field>, LabError> {
        let Some(path) = self.path(section, key) else {
            return Ok(None);
        };
        let origin = self.origin(section, key);
        let (field, _) = snapshot::read(&path)
            .map_err(|e| key_error(section, key, origin, format!("cannot read {}: {e}", path.display())))?;
        if field.grid() != grid {
            return Err(key_error(section, key, origin, "snapshot grid differs from [grid]"));
        }
        Ok(Some(field))
    }

    /// Sum of cosine modes given as `j:k:amp, ...`.
    fn modes(&self, section: &str, key: &str, grid: &GridSpec) -> Result<Option<Field>, LabError> {
        let Some((v, origin)) = self.raw(section, key) else {
            return Ok(None);
        };
        let bad = |msg: String| key_error(section, key, Some(origin), msg);
        let mut terms = Vec::new();
        for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(bad(format!("`{item}` is not of the form j:k:amplitude")));
            }
            let j: usize = parts[0].parse().map_err(|_| bad(format!("bad mode index in `{item}`")))?;
            let k: usize = parts[1].parse().map_err(|_| bad(format!("bad mode index in `{item}`")))?;
            let a: f64 = parts[2]
                .parse()
                .ok()
                .filter(|a: &f64| a.is_finite())
                .ok_or_else(|| bad(format!("bad amplitude in `{item}`")))?;
            terms.push((grid.wavenumber_x(j), grid.wavenumber_y(k), a));
        }
        if terms.is_empty() {
            return Err(bad("no modes given".into()));
        }
        Ok(Some(Field::from_fn(*grid, |x, y| {
            terms.iter().map(|(kx, ky, a)| a * (kx * x).cos() * (ky * y).cos()).sum()
        })))
    }
}

fn section_error(section: &str, err: ChdError) -> LabError {
    LabError::Config {
        key: section.to_string(),
        origin: None,
        msg: err.to_string(),
    }
}

const KINDS: &str = "simulate, steady, rate, pullback, dependence, gronwall-verify";

/// Parses config text. Relative paths inside it resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig, LabError> {
    parse_config_with(text, base, &[])
}

/// As [`parse_config`], applying `section.key=value` overrides first.
pub fn parse_config_with(text: &str, base: &Path, overrides: &[String]) -> Result<RunConfig, LabError> {
    let mut doc = IniDoc::parse(text)?;
    for o in overrides {
        doc.apply_override(o)?;
    }
    let r = Reader { doc: &doc, base };

    let kind = r
        .string("experiment", "kind")
        .ok_or_else(|| key_error("experiment", "kind", None, format!("missing required key (one of {KINDS})")))?;
    let kind_origin = r.origin("experiment", "kind");
    let simulates = kind != "gronwall-verify";

    let run = read_run(&r, simulates)?;
    let model = if simulates {
        let m = read_model(&r)?;
        if run.k1.is_some() && m.source.tail_integral(0.0).is_err() {
            return Err(key_error(
                "run",
                "k1",
                r.origin("run", "k1"),
                "the modified energy needs a zero or separable-decay source",
            ));
        }
        Some(m)
    } else {
        for s in ["grid", "physics", "initial", "source", "stepper"] {
            doc.ignore_section(s);
        }
        None
    };

    let experiment = match kind {
        "simulate" => Experiment::Simulate,
        "steady" => Experiment::Steady {
            tol: r.positive("experiment", "tol", Some(1e-8))?,
            max_time: r.positive("experiment", "max_time", Some(100.0))?,
            check_every: r.usize_or("experiment", "check_every", 10)?.max(1),
        },
        "rate" => read_rate(&r, model.as_ref().expect("model"))?,
        "pullback" => {
            let back_times = r
                .list_f64("experiment", "back_times")?
                .ok_or_else(|| key_error("experiment", "back_times", None, "missing required key"))?;
            Experiment::Pullback {
                back_times,
                t_star: r.f64_or("experiment", "t_star", 0.0)?,
                scalings: r.list_f64("experiment", "scalings")?.unwrap_or_else(|| vec![1.0]),
            }
        }
        "dependence" => {
            let m = model.as_ref().expect("model");
            let deltas = r
                .list_f64("experiment", "deltas")?
                .unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4]);
            let direction = match r.modes("experiment", "direction_modes", &m.grid)? {
                Some(f) => f,
                None => r
                    .read_field("experiment", "direction_file", &m.grid)?
                    .ok_or_else(|| {
                        key_error("experiment", "direction_modes", None, "dependence needs direction_modes or direction_file")
                    })?,
            };
            Experiment::Dependence { deltas, direction }
        }
        "gronwall-verify" => {
            let d = EnsembleRanges::default();
            let pair = |key: &str, default: (f64, f64)| -> Result<(f64, f64), LabError> {
                match r.list_f64("experiment", key)? {
                    None => Ok(default),
                    Some(v) if v.len() == 2 && v[0] <= v[1] => Ok((v[0], v[1])),
                    Some(_) => Err(key_error("experiment", key, r.origin("experiment", key), "expected `low, high`")),
                }
            };
            let max_n = r.usize_or("experiment", "max_n", d.max_n as usize)?;
            Experiment::GronwallVerify {
                seed: r.u64("experiment", "seed")?.unwrap_or(0),
                count: r.usize_or("experiment", "count", 200)?,
                samples: r.usize_or("experiment", "samples", 400)?.max(1),
                ranges: EnsembleRanges {
                    max_n: u32::try_from(max_n)
                        .map_err(|_| key_error("experiment", "max_n", r.origin("experiment", "max_n"), "too large"))?,
                    gamma: pair("gamma_range", d.gamma)?,
                    a: pair("a_range", d.a)?,
                    y0: pair("y0_range", d.y0)?,
                    horizon: r.positive("experiment", "horizon", Some(d.horizon))?,
                    pieces_per_unit: r.usize_or("experiment", "pieces_per_unit", d.pieces_per_unit)?.max(1),
                },
            }
        }
        other => {
            return Err(key_error(
                "experiment",
                "kind",
                kind_origin,
                format!("unknown experiment `{other}` (expected one of {KINDS})"),
            ))
        }
    };

    if let Some((key, entry)) = doc.first_unused() {
        return Err(LabError::Config {
            key,
            origin: Some(entry.origin),
            msg: format!("unknown key for experiment `{kind}`"),
        });
    }
    Ok(RunConfig { model, run, experiment })
}

fn read_run(r: &Reader, simulates: bool) -> Result<RunSection, LabError> {
    let t_end = if simulates {
        r.f64_or("run", "t_end", 0.0)?
    } else {
        0.0
    };
    if t_end < 0.0 {
        return Err(key_error("run", "t_end", r.origin("run", "t_end"), "must be nonnegative"));
    }
    let k1 = r.opt_f64("run", "k1")?;
    let psi1 = match (r.opt_f64("run", "psi1_c5")?, r.opt_f64("run", "psi1_c9")?) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return Err(key_error("run", "psi1_c5", None, "psi1_c5 and psi1_c9 must be given together")),
    };
    Ok(RunSection {
        t_end,
        snapshot_every: r.usize_or("run", "snapshot_every", 0)?,
        diagnostics_every: r.usize_or("run", "diagnostics_every", 1)?.max(1),
        output_dir: r.path("run", "output_dir").unwrap_or_else(|| r.base.join("chd-output")),
        k1,
        psi1,
    })
}

fn read_model(r: &Reader) -> Result<Model, LabError> {
    let grid = GridSpec::new(
        r.usize_or("grid", "nx", 0)?,
        r.usize_or("grid", "ny", 0)?,
        r.f64_or("grid", "lx", 1.0)?,
        r.f64_or("grid", "ly", 1.0)?,
    )
    .map_err(|e| section_error("grid", e))?;
    let params = PhysicsParams::new(r.f64("physics", "eps")?, r.f64_or("physics", "gamma", 1.0)?)
        .map_err(|e| section_error("physics", e))?;
    let initial = read_initial(r, &grid)?;
    let source = read_source(r, &grid)?;
    let defaults = StepperConfig::default();
    let stepper = StepperConfig {
        dt: r.f64_or("stepper", "dt", defaults.dt)?,
        beta: r.f64_or("stepper", "beta", defaults.beta)?,
        picard_iters: r.usize_or("stepper", "picard_iters", defaults.picard_iters)?,
        dealias: r.bool_or("stepper", "dealias", defaults.dealias)?,
    };
    stepper.validate().map_err(|e| section_error("stepper", e))?;
    Ok(Model {
        grid,
        params,
        initial,
        source,
        stepper,
    })
}

fn read_initial(r: &Reader, grid: &GridSpec) -> Result<Field, LabError> {
    let s = "initial";
    let kind = r
        .string(s, "kind")
        .ok_or_else(|| key_error(s, "kind", None, "missing required key"))?;
    let mass = || r.f64_or(s, "mass", 0.0);
    let field = match kind {
        "constant" => init::constant(*grid, mass()?),
        "cosine-perturbation" => init::cosine_perturbation(
            *grid,
            mass()?,
            r.f64(s, "amplitude")?,
            r.usize_or(s, "mode_x", 1)?,
            r.usize_or(s, "mode_y", 0)?,
        ),
        "random-seeded" => {
            let seed = r
                .u64(s, "seed")?
                .ok_or_else(|| key_error(s, "seed", None, "random initial data need a fixed seed"))?;
            init::random_seeded(*grid, mass()?, r.f64(s, "amplitude")?, seed)
        }
        "rough" => {
            let seed = r
                .u64(s, "seed")?
                .ok_or_else(|| key_error(s, "seed", None, "random initial data need a fixed seed"))?;
            init::rough(*grid, mass()?, r.f64(s, "amplitude")?, r.f64_or(s, "decay", 0.6)?, seed)
                .map_err(|e| section_error(s, e))?
        }
        "modes" => {
            let f = r
                .modes(s, "modes", grid)?
                .ok_or_else(|| key_error(s, "modes", None, "missing required key"))?;
            let m = mass()?;
            f.map(|v| v + m)
        }
        "file" => r
            .read_field(s, "path", grid)?
            .ok_or_else(|| key_error(s, "path", None, "missing required key"))?,
        other => {
            return Err(key_error(
                s,
                "kind",
                r.origin(s, "kind"),
                format!("unknown initial kind `{other}` (expected constant, cosine-perturbation, random-seeded, rough, modes or file)"),
            ))
        }
    };
    if !field.is_finite() {
        return Err(key_error(s, "kind", None, "initial field has non-finite values"));
    }
    Ok(field)
}

fn read_source(r: &Reader, grid: &GridSpec) -> Result<SourceModel, LabError> {
    let s = "source";
    let variant = r.string(s, "variant").unwrap_or("zero");
    let profile = || -> Result<Profile, LabError> {
        let (field, key) = match r.modes(s, "profile_modes", grid)? {
            Some(f) => (f, "profile_modes"),
            None => (
                r.read_field(s, "profile_file", grid)?.ok_or_else(|| {
                    key_error(s, "profile_modes", None, "source needs profile_modes or profile_file")
                })?,
                "profile_file",
            ),
        };
        let offset = r.f64_or(s, "profile_offset", 0.0)?;
        let field = field.map(|v| v + offset);
        Profile::new(field.clone()).map_err(|e| match e {
            ChdError::Compatibility { .. } => key_error(
                s,
                key,
                r.origin(s, key),
                format!(
                    "source profile has mean {:e}; the source must integrate to zero over the domain \
                     (compatibility condition for div u = S)",
                    mean(&field)
                ),
            ),
            other => section_error(s, other),
        })
    };
    let model = match variant {
        "zero" => SourceModel::zero(*grid),
        "separable-decay" => {
            SourceModel::separable_decay(profile()?, r.f64(s, "amplitude")?, r.positive(s, "rho", None)?)
                .map_err(|e| section_error(s, e))?
        }
        "periodic" => SourceModel::periodic(profile()?, r.f64(s, "amplitude")?, r.f64(s, "omega")?)
            .map_err(|e| section_error(s, e))?,
        "tabulated" => {
            let path = r
                .path(s, "index")
                .ok_or_else(|| key_error(s, "index", None, "missing required key"))?;
            let m = SourceModel::load_tabulated(&path).map_err(|e| {
                let msg = match e {
                    ChdError::Compatibility { .. } => format!(
                        "{e}; the source must integrate to zero over the domain (compatibility condition for div u = S)"
                    ),
                    other => format!("{}: {other}", path.display()),
                };
                key_error(s, "index", r.origin(s, "index"), msg)
            })?;
            if m.grid() != grid {
                return Err(key_error(s, "index", r.origin(s, "index"), "tabulated frames differ from [grid]"));
            }
            m
        }
        other => {
            return Err(key_error(
                s,
                "variant",
                r.origin(s, "variant"),
                format!("unknown source variant `{other}` (expected zero, separable-decay, periodic or tabulated)"),
            ))
        }
    };
    Ok(model)
}

fn read_rate(r: &Reader, model: &Model) -> Result<Experiment, LabError> {
    let s = "experiment";
    let target = match r.string(s, "target").unwrap_or("constant") {
        "constant" => RateTarget::Constant(r.f64_or(s, "target_mass", mean(&model.initial))?),
        "steady" => RateTarget::Steady {
            tol: r.positive(s, "tol", Some(1e-8))?,
            max_time: r.positive(s, "max_time", Some(100.0))?,
        },
        "file" => RateTarget::Field(
            r.read_field(s, "target_file", &model.grid)?
                .ok_or_else(|| key_error(s, "target_file", None, "missing required key"))?,
        ),
        other => {
            return Err(key_error(
                s,
                "target",
                r.origin(s, "target"),
                format!("unknown rate target `{other}` (expected constant, steady or file)"),
            ))
        }
    };
    let fit_start = r.f64_or(s, "fit_start", 0.0)?;
    let fit_end = r.f64_or(s, "fit_end", f64::INFINITY)?;
    if fit_end <= fit_start {
        return Err(key_error(s, "fit_end", r.origin(s, "fit_end"), "must exceed fit_start"));
    }
    Ok(Experiment::Rate {
        target,
        fit_start,
        fit_end,
    })
}
