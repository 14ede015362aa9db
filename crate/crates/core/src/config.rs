//! Run configuration: flat `section.key = value` lines with `#` comments.
//!
//! ```text
//! mesh.lengths = 1, 0.4, 1
//! mesh.cells = 5, 2, 5
//! params.current_anode = 0.5
//! solver.dt = 0.05
//! ```
//!
//! Only `mesh.lengths` and `mesh.cells` are required. Unknown keys, repeated
//! keys and malformed values are errors that name the line. Lists are
//! comma-separated; the OCP schedule is a list of `time:offset` pairs.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::coupled::{OuterMode, SolverSettings, TauMode};
use crate::error::{Error, Result};
use crate::mesh::{build_sandwich_mesh, Mesh, Width};
use crate::params::{FluxProfile, ParamSpec, RobinSign, SourceForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Validate,
    Mms,
    SweepTau,
    OracleCompare,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::Validate => "validate",
            Mode::Mms => "mms",
            Mode::SweepTau => "sweep-tau",
            Mode::OracleCompare => "oracle-compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshConfig {
    pub lengths: [f64; 3],
    pub cells: [usize; 3],
    pub width: Option<Width>,
}

impl MeshConfig {
    pub fn build(&self) -> Result<Mesh> {
        build_sandwich_mesh(self.lengths, self.cells, self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Write a field file every `snapshot_stride` snapshots (0 disables).
    pub snapshot_stride: usize,
    /// Per-step Picard histories in the run log.
    pub picard_history: bool,
    /// `L^inf` monitor columns in the run log.
    pub linf: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("output"),
            snapshot_stride: 1,
            picard_history: false,
            linf: true,
        }
    }
}

/// Settings for the `mms`, `sweep-tau` and `oracle-compare` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// MMS case id, or `all`.
    pub mms_case: String,
    pub refinements: Vec<usize>,
    pub time_steps: Vec<f64>,
    pub taus: Vec<f64>,
    pub oracle_tau: f64,
    pub oracle_seeds: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            mms_case: "all".into(),
            refinements: vec![1, 2, 4, 8],
            time_steps: vec![0.2, 0.1, 0.05, 0.025],
            taus: vec![1.0, 1e-2, 1e-4, 1e-6, 1e-8],
            oracle_tau: 0.1,
            oracle_seeds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub mesh: MeshConfig,
    pub params: ParamSpec,
    pub solver: SolverSettings,
    pub output: OutputConfig,
    pub study: StudyConfig,
}

type Setter = fn(&mut RunConfig, &str) -> std::result::Result<(), String>;

fn float(v: &str) -> std::result::Result<f64, String> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| format!("expected a number, got '{}'", v.trim()))
}

fn int(v: &str) -> std::result::Result<usize, String> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| format!("expected a non-negative integer, got '{}'", v.trim()))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("expected true or false, got '{other}'")),
    }
}

fn list<T>(v: &str, item: fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(item).collect()
}

fn array<const N: usize, T: std::fmt::Debug>(
    v: &str,
    item: fn(&str) -> std::result::Result<T, String>,
) -> std::result::Result<[T; N], String> {
    let items = list(v, item)?;
    let len = items.len();
    items
        .try_into()
        .map_err(|_| format!("expected {N} comma-separated values, got {len}"))
}

fn choice<T: Copy>(v: &str, options: &[(&str, T)]) -> std::result::Result<T, String> {
    let v = v.trim();
    options
        .iter()
        .find(|(name, _)| *name == v)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            format!("expected one of {}, got '{v}'", names.join(" | "))
        })
}

const MODES: [(&str, Mode); 5] = [
    ("run", Mode::Run),
    ("validate", Mode::Validate),
    ("mms", Mode::Mms),
    ("sweep-tau", Mode::SweepTau),
    ("oracle-compare", Mode::OracleCompare),
];
const PROFILES: [(&str, FluxProfile); 2] = [("sine", FluxProfile::Sine), ("constant", FluxProfile::Constant)];
const FORMS: [(&str, SourceForm); 2] = [
    ("reduced", SourceForm::Reduced),
    ("overpotential", SourceForm::Overpotential),
];
const SIGNS: [(&str, RobinSign); 2] = [("cooling", RobinSign::Cooling), ("literal", RobinSign::Literal)];
const OUTER: [(&str, OuterMode); 2] = [("per-step", OuterMode::PerStep), ("trajectory", OuterMode::Trajectory)];

fn schedule(v: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    let knots = list(v, |item| {
        let (t, u) = item
            .split_once(':')
            .ok_or_else(|| format!("expected time:offset, got '{}'", item.trim()))?;
        Ok((float(t)?, float(u)?))
    })?;
    if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err("schedule times must be strictly increasing".into());
    }
    Ok(knots)
}

fn width_mut(c: &mut RunConfig) -> &mut Width {
    c.mesh.width.get_or_insert(Width { extent: 0.0, cells: 0 })
}

/// Every accepted key with its setter, in echo order.
const KEYS: &[(&str, Setter)] = &[
    ("mode", |c, v| Ok(c.mode = choice(v, &MODES)?)),
    ("mesh.lengths", |c, v| Ok(c.mesh.lengths = array(v, float)?)),
    ("mesh.cells", |c, v| Ok(c.mesh.cells = array(v, int)?)),
    ("mesh.width", |c, v| Ok(width_mut(c).extent = float(v)?)),
    ("mesh.width_cells", |c, v| Ok(width_mut(c).cells = int(v)?)),
    ("params.rho_cp", |c, v| Ok(c.params.rho_cp = float(v)?)),
    ("params.k", |c, v| Ok(c.params.k = array(v, float)?)),
    ("params.sigma_s", |c, v| Ok(c.params.sigma_s = array(v, float)?)),
    ("params.sigma_e", |c, v| Ok(c.params.sigma_e = array(v, float)?)),
    ("params.alpha", |c, v| Ok(c.params.alpha = float(v)?)),
    ("params.a_s", |c, v| Ok(c.params.a_s = float(v)?)),
    ("params.k1", |c, v| Ok(c.params.k1 = float(v)?)),
    ("params.t_ambient", |c, v| Ok(c.params.t_ambient = float(v)?)),
    ("params.d1", |c, v| Ok(c.params.d1 = float(v)?)),
    ("params.g1", |c, v| Ok(c.params.g1 = array(v, float)?)),
    ("params.g0", |c, v| Ok(c.params.g0 = Some(float(v)?))),
    ("params.ocp", |c, v| Ok(c.params.ocp = array(v, float)?)),
    ("params.ocp_schedule", |c, v| Ok(c.params.ocp_schedule = schedule(v)?)),
    ("params.f_amplitude", |c, v| Ok(c.params.f_amplitude = float(v)?)),
    ("params.f_profile", |c, v| Ok(c.params.f_profile = choice(v, &PROFILES)?)),
    ("params.current_anode", |c, v| Ok(c.params.current_anode = float(v)?)),
    ("params.current_cathode", |c, v| Ok(c.params.current_cathode = Some(float(v)?))),
    ("params.u0", |c, v| Ok(c.params.u0 = float(v)?)),
    ("params.u0_gradient", |c, v| Ok(c.params.u0_gradient = float(v)?)),
    ("params.source_form", |c, v| Ok(c.params.source_form = choice(v, &FORMS)?)),
    ("params.robin_sign", |c, v| Ok(c.params.robin_sign = choice(v, &SIGNS)?)),
    ("solver.tau_sequence", |c, v| {
        let taus = list(v, float)?;
        c.solver.tau_mode = if taus.is_empty() {
            TauMode::ConstrainedZero
        } else {
            TauMode::Continuation(taus)
        };
        Ok(())
    }),
    ("solver.delta", |c, v| Ok(c.solver.delta = float(v)?)),
    ("solver.nonlinear_tol", |c, v| Ok(c.solver.nonlinear.tol = float(v)?)),
    ("solver.nonlinear_max_iters", |c, v| Ok(c.solver.nonlinear.max_iters = int(v)?)),
    ("solver.damping_floor", |c, v| Ok(c.solver.nonlinear.damping_floor = float(v)?)),
    ("solver.fallback_iters", |c, v| Ok(c.solver.nonlinear.picard_fallback_iters = int(v)?)),
    ("solver.fallback_relaxation", |c, v| {
        Ok(c.solver.nonlinear.picard_fallback_relaxation = float(v)?)
    }),
    ("solver.picard_tol", |c, v| Ok(c.solver.picard_tol = float(v)?)),
    ("solver.picard_max_iters", |c, v| Ok(c.solver.picard_max_iters = int(v)?)),
    ("solver.picard_relaxation", |c, v| Ok(c.solver.picard_relaxation = float(v)?)),
    ("solver.dt", |c, v| Ok(c.solver.dt = float(v)?)),
    ("solver.horizon", |c, v| Ok(c.solver.horizon = float(v)?)),
    ("solver.eps", |c, v| Ok(c.solver.eps = float(v)?)),
    ("solver.overflow_ceiling", |c, v| Ok(c.solver.overflow_ceiling = float(v)?)),
    ("solver.outer_mode", |c, v| Ok(c.solver.outer_mode = choice(v, &OUTER)?)),
    ("solver.tstar_bisection", |c, v| Ok(c.solver.tstar_bisection = int(v)?)),
    ("output.directory", |c, v| Ok(c.output.directory = PathBuf::from(v.trim()))),
    ("output.snapshot_stride", |c, v| Ok(c.output.snapshot_stride = int(v)?)),
    ("output.picard_history", |c, v| Ok(c.output.picard_history = boolean(v)?)),
    ("output.linf", |c, v| Ok(c.output.linf = boolean(v)?)),
    ("study.mms_case", |c, v| Ok(c.study.mms_case = v.trim().to_string())),
    ("study.refinements", |c, v| Ok(c.study.refinements = list(v, int)?)),
    ("study.time_steps", |c, v| Ok(c.study.time_steps = list(v, float)?)),
    ("study.taus", |c, v| Ok(c.study.taus = list(v, float)?)),
    ("study.oracle_tau", |c, v| Ok(c.study.oracle_tau = float(v)?)),
    ("study.oracle_seeds", |c, v| Ok(c.study.oracle_seeds = int(v)? as u64)),
];

const REQUIRED: [&str; 2] = ["mesh.lengths", "mesh.cells"];

/// Parses configuration text and applies defaults for absent keys.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut config = RunConfig {
        mode: Mode::Run,
        mesh: MeshConfig {
            lengths: [0.0; 3],
            cells: [0; 3],
            width: None,
        },
        params: ParamSpec::default(),
        solver: SolverSettings::default(),
        output: OutputConfig::default(),
        study: StudyConfig::default(),
    };
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(format!("line {line_no}: expected 'section.key = value', got '{line}'"))
        })?;
        let key = key.trim();
        let (name, setter) = KEYS
            .iter()
            .find(|(k, _)| *k == key)
            .ok_or_else(|| Error::config(format!("line {line_no}: unknown key '{key}'")))?;
        if let Some(first) = seen.insert(name, line_no) {
            return Err(Error::config(format!(
                "line {line_no}: key '{key}' repeats line {first}"
            )));
        }
        setter(&mut config, value)
            .map_err(|msg| Error::config(format!("line {line_no}: {key}: {msg}")))?;
    }
    for key in REQUIRED {
        if !seen.contains_key(key) {
            return Err(Error::config(format!("missing required key '{key}'")));
        }
    }
    let at = |key: &str| seen.get(key).map_or(String::new(), |l| format!("line {l}: "));
    if let Some(w) = config.mesh.width {
        if !(seen.contains_key("mesh.width") && seen.contains_key("mesh.width_cells")) {
            return Err(Error::config("mesh.width and mesh.width_cells must be given together"));
        }
        if !(w.extent > 0.0) {
            return Err(Error::config(format!("{}mesh.width must be positive", at("mesh.width"))));
        }
        if w.cells == 0 {
            return Err(Error::config(format!(
                "{}mesh.width_cells must be positive",
                at("mesh.width_cells")
            )));
        }
    }
    if let Err(Error::Config(msg)) = config.solver.validate() {
        let key = msg.split_whitespace().next().unwrap_or("");
        return Err(Error::config(format!("{}{msg}", at(key))));
    }
    if config.study.refinements.contains(&0) {
        return Err(Error::config(format!("{}study.refinements must be positive", at("study.refinements"))));
    }
    Ok(config)
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn name_of<T: PartialEq + Copy>(v: T, options: &[(&'static str, T)]) -> &'static str {
    options.iter().find(|(_, t)| *t == v).map(|(n, _)| *n).unwrap_or("?")
}

impl RunConfig {
    /// Effective configuration in the input format, one key per line.
    /// Parsing the echo yields the same configuration.
    pub fn echo(&self) -> String {
        let p = &self.params;
        let s = &self.solver;
        let mut lines = vec![
            ("mode", self.mode.name().to_string()),
            ("mesh.lengths", join(&self.mesh.lengths)),
            ("mesh.cells", join(&self.mesh.cells)),
        ];
        if let Some(w) = self.mesh.width {
            lines.push(("mesh.width", w.extent.to_string()));
            lines.push(("mesh.width_cells", w.cells.to_string()));
        }
        lines.extend([
            ("params.rho_cp", p.rho_cp.to_string()),
            ("params.k", join(&p.k)),
            ("params.sigma_s", join(&p.sigma_s)),
            ("params.sigma_e", join(&p.sigma_e)),
            ("params.alpha", p.alpha.to_string()),
            ("params.a_s", p.a_s.to_string()),
            ("params.k1", p.k1.to_string()),
            ("params.t_ambient", p.t_ambient.to_string()),
            ("params.d1", p.d1.to_string()),
            ("params.g1", join(&p.g1)),
        ]);
        if let Some(g0) = p.g0 {
            lines.push(("params.g0", g0.to_string()));
        }
        lines.push(("params.ocp", join(&p.ocp)));
        let knots: Vec<String> = p.ocp_schedule.iter().map(|(t, v)| format!("{t}:{v}")).collect();
        lines.extend([
            ("params.ocp_schedule", knots.join(", ")),
            ("params.f_amplitude", p.f_amplitude.to_string()),
            ("params.f_profile", name_of(p.f_profile, &PROFILES).into()),
            ("params.current_anode", p.current_anode.to_string()),
        ]);
        if let Some(ic) = p.current_cathode {
            lines.push(("params.current_cathode", ic.to_string()));
        }
        let taus = match &s.tau_mode {
            TauMode::ConstrainedZero => String::new(),
            TauMode::Continuation(t) => join(t),
        };
        lines.extend([
            ("params.u0", p.u0.to_string()),
            ("params.u0_gradient", p.u0_gradient.to_string()),
            ("params.source_form", name_of(p.source_form, &FORMS).into()),
            ("params.robin_sign", name_of(p.robin_sign, &SIGNS).into()),
            ("solver.tau_sequence", taus),
            ("solver.delta", s.delta.to_string()),
            ("solver.nonlinear_tol", s.nonlinear.tol.to_string()),
            ("solver.nonlinear_max_iters", s.nonlinear.max_iters.to_string()),
            ("solver.damping_floor", s.nonlinear.damping_floor.to_string()),
            ("solver.fallback_iters", s.nonlinear.picard_fallback_iters.to_string()),
            ("solver.fallback_relaxation", s.nonlinear.picard_fallback_relaxation.to_string()),
            ("solver.picard_tol", s.picard_tol.to_string()),
            ("solver.picard_max_iters", s.picard_max_iters.to_string()),
            ("solver.picard_relaxation", s.picard_relaxation.to_string()),
            ("solver.dt", s.dt.to_string()),
            ("solver.horizon", s.horizon.to_string()),
            ("solver.eps", s.eps.to_string()),
            ("solver.overflow_ceiling", s.overflow_ceiling.to_string()),
            ("solver.outer_mode", name_of(s.outer_mode, &OUTER).into()),
            ("solver.tstar_bisection", s.tstar_bisection.to_string()),
            ("output.directory", self.output.directory.display().to_string()),
            ("output.snapshot_stride", self.output.snapshot_stride.to_string()),
            ("output.picard_history", self.output.picard_history.to_string()),
            ("output.linf", self.output.linf.to_string()),
            ("study.mms_case", self.study.mms_case.clone()),
            ("study.refinements", join(&self.study.refinements)),
            ("study.time_steps", join(&self.study.time_steps)),
            ("study.taus", join(&self.study.taus)),
            ("study.oracle_tau", self.study.oracle_tau.to_string()),
            ("study.oracle_seeds", self.study.oracle_seeds.to_string()),
        ]);
        let mut out = String::new();
        for (k, v) in lines {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
