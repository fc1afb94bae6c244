//! Scenario files.
//!
//! A scenario is flat `key = value` text split into sections. `#` starts a
//! comment. Numbers may carry a unit suffix (`m`, `km`, `nmi`, `ft`, `s`,
//! `min`, `deg`, `rad`) and are converted to SI on input. Vectors are
//! comma separated, matrices use `;` between rows, and waypoints are
//! written `(x, y, z), (x, y, z), ...`.
//!
//! ```text
//! [problem]      t0, t_final, target, avoid, reference, reference_radius,
//!                reference_speed
//! [grid]         min, max, nodes
//! [dynamics]     kind, control_lower, control_upper, disturbance_lower,
//!                disturbance_upper, drift, control_matrix,
//!                disturbance_matrix
//! [shape.NAME]   kind, lower, upper, axis, center, radius, half_height, of
//! [solver]       cfl, samples, record_every, mode, scheme
//! [oracle]       enabled, steps, control_samples, disturbance_samples
//! [separation]   horizontal, height
//! [output]       dir
//! [aircraft.NAME] waypoints, entry_time, profile, gamma_max,
//!                speed_fraction, wind_bound, tw_kind, tw_waypoint,
//!                tw_lower, tw_upper, tw_t_lo, tw_t_hi, s_range, z_range,
//!                nodes
//! ```
//!
//! A scenario describes either one system (`[grid]`, `[dynamics]` and a
//! target shape) or a set of aircraft, never both.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::dynamics::{
    AffineSystem, AircraftModel, DoubleIntegrator, DynamicsRef, InputBox, PlanarGame, Polynomial,
    ProfileSet, SingleIntegrator, DEFAULT_SPEED_FRACTION, MAX_PATH_ANGLE,
};
use crate::error::{Error, Result};
use crate::grid::{GeometrySpec, Grid};
use crate::hamiltonian::DEFAULT_INPUT_SAMPLES;
use crate::reach_avoid::{AircraftSetup, Separation, SweepOptions, TargetWindow, WindowKind, FT, NMI};
use crate::solver::{Mode, Scheme, SolveOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub radius: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub t0: f64,
    pub t_final: f64,
    pub target: Option<String>,
    pub avoid: Option<String>,
    /// Closed-form 1D reach solution `max(0, |x| - speed tau) - radius`.
    pub reference: Option<Reference>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<Grid>> {
        let spec: Vec<(f64, f64, usize)> = (0..self.min.len())
            .map(|i| (self.min[i], self.max[i], self.nodes[i]))
            .collect();
        Ok(Arc::new(Grid::uniform(&spec)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsKind {
    Integrator1d,
    DoubleIntegrator,
    Game2d,
    Affine,
}

impl DynamicsKind {
    fn name(self) -> &'static str {
        match self {
            DynamicsKind::Integrator1d => "integrator1d",
            DynamicsKind::DoubleIntegrator => "double_integrator",
            DynamicsKind::Game2d => "game2d",
            DynamicsKind::Affine => "affine",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "integrator1d" => Some(DynamicsKind::Integrator1d),
            "double_integrator" => Some(DynamicsKind::DoubleIntegrator),
            "game2d" => Some(DynamicsKind::Game2d),
            "affine" => Some(DynamicsKind::Affine),
            _ => None,
        }
    }

    fn state_dim(self) -> Option<usize> {
        match self {
            DynamicsKind::Integrator1d => Some(1),
            DynamicsKind::DoubleIntegrator | DynamicsKind::Game2d => Some(2),
            DynamicsKind::Affine => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsConfig {
    pub kind: DynamicsKind,
    pub control: InputBox,
    pub disturbance: InputBox,
    pub drift: Vec<Polynomial>,
    pub control_matrix: Vec<Vec<Polynomial>>,
    pub disturbance_matrix: Vec<Vec<Polynomial>>,
}

impl DynamicsConfig {
    pub fn build(&self) -> Result<DynamicsRef> {
        let (c, d) = (self.control.clone(), self.disturbance.clone());
        Ok(match self.kind {
            DynamicsKind::Integrator1d => Arc::new(SingleIntegrator::with_boxes(c, d)?),
            DynamicsKind::DoubleIntegrator => Arc::new(DoubleIntegrator::with_boxes(c, d)?),
            DynamicsKind::Game2d => Arc::new(PlanarGame::with_boxes(c, d)?),
            DynamicsKind::Affine => Arc::new(AffineSystem::new(
                self.drift.clone(),
                self.control_matrix.clone(),
                self.disturbance_matrix.clone(),
                c,
                d,
            )?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeConfig {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Cylinder {
        axis: usize,
        center: Vec<f64>,
        radius: f64,
        half_height: f64,
    },
    Union(Vec<String>),
    Intersection(Vec<String>),
    Complement(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub cfl: f64,
    pub samples: usize,
    pub record_every: usize,
    pub mode: Mode,
    pub scheme: Scheme,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            samples: DEFAULT_INPUT_SAMPLES,
            record_every: 1,
            mode: Mode::Terminal,
            scheme: Scheme::LaxFriedrichs1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub enabled: bool,
    pub steps: usize,
    pub control_samples: usize,
    pub disturbance_samples: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            steps: 20,
            control_samples: 3,
            disturbance_samples: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AircraftConfig {
    pub name: String,
    pub waypoints: Vec<[f64; 3]>,
    pub entry_time: f64,
    /// Speed table path as written; relative paths resolve against the
    /// scenario file's directory.
    pub profile: PathBuf,
    pub gamma_max: f64,
    pub speed_fraction: f64,
    pub wind_bound: [f64; 3],
    pub window: TargetWindow,
    pub s_range: (f64, f64),
    pub z_range: (f64, f64),
    pub nodes: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub problem: Problem,
    pub grid: Option<GridSpec>,
    pub dynamics: Option<DynamicsConfig>,
    pub shapes: BTreeMap<String, ShapeConfig>,
    pub solver: SolverConfig,
    pub oracle: OracleConfig,
    pub separation: Separation,
    pub output: Option<PathBuf>,
    pub aircraft: Vec<AircraftConfig>,
    /// Directory that relative paths are resolved against.
    pub base_dir: PathBuf,
}

fn config_err(line: usize, key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: `{key}`: {msg}"))
}

/// Parses a number with an optional unit suffix into SI.
fn parse_quantity(text: &str) -> Option<f64> {
    let t = text.trim();
    const UNITS: [(&str, f64); 8] = [
        ("nmi", NMI),
        ("km", 1000.0),
        ("ft", FT),
        ("min", 60.0),
        ("deg", std::f64::consts::PI / 180.0),
        ("rad", 1.0),
        ("m", 1.0),
        ("s", 1.0),
    ];
    for (suffix, scale) in UNITS {
        if let Some(num) = t.strip_suffix(suffix) {
            let num = num.trim_end();
            if num.is_empty() {
                return None;
            }
            return num.parse::<f64>().ok().filter(|v| v.is_finite()).map(|v| v * scale);
        }
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

struct Entry {
    value: String,
    line: usize,
}

struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<Entry> {
        self.take(key).ok_or_else(|| {
            Error::Config(format!(
                "line {}: section [{}] is missing required key `{key}`",
                self.line, self.name
            ))
        })
    }

    fn finish(self) -> Result<()> {
        if let Some((key, e)) = self.entries.into_iter().min_by_key(|(_, e)| e.line) {
            return Err(config_err(e.line, &key, format!("unknown key in section [{}]", self.name)));
        }
        Ok(())
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key)
            .map(|e| parse_quantity(&e.value).ok_or_else(|| config_err(e.line, key, "expected a finite number")))
            .transpose()
    }

    fn req_number(&mut self, key: &str) -> Result<f64> {
        let e = self.require(key)?;
        parse_quantity(&e.value).ok_or_else(|| config_err(e.line, key, "expected a finite number"))
    }

    fn integer(&mut self, key: &str) -> Result<Option<usize>> {
        self.take(key)
            .map(|e| {
                e.value
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| config_err(e.line, key, "expected a non-negative integer"))
            })
            .transpose()
    }

    fn vector(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        self.take(key).map(|e| parse_vector(&e.value, e.line, key)).transpose()
    }

    fn req_vector(&mut self, key: &str) -> Result<Vec<f64>> {
        let e = self.require(key)?;
        parse_vector(&e.value, e.line, key)
    }

    fn string(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|e| e.value.trim().to_string())
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        self.take(key)
            .map(|e| match e.value.trim() {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(config_err(e.line, key, "expected true or false")),
            })
            .transpose()
    }
}

fn parse_vector(text: &str, line: usize, key: &str) -> Result<Vec<f64>> {
    let t = text.trim();
    if t.is_empty() {
        return Ok(Vec::new());
    }
    t.split(',')
        .map(|p| parse_quantity(p).ok_or_else(|| config_err(line, key, format!("bad number {:?}", p.trim()))))
        .collect()
}

fn parse_matrix(text: &str, line: usize, key: &str) -> Result<Vec<Vec<Polynomial>>> {
    text.split(';')
        .map(|row| {
            let row = row.trim();
            if row.is_empty() {
                return Ok(Vec::new());
            }
            row.split(',')
                .map(|p| Polynomial::parse(p.trim()).map_err(|e| config_err(line, key, e)))
                .collect()
        })
        .collect()
}

fn parse_waypoints(text: &str, line: usize, key: &str) -> Result<Vec<[f64; 3]>> {
    let bad = |m: &str| config_err(line, key, m);
    let mut out = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let r = rest.strip_prefix('(').ok_or_else(|| bad("waypoints are written (x, y, z)"))?;
        let end = r.find(')').ok_or_else(|| bad("unclosed waypoint"))?;
        let v = parse_vector(&r[..end], line, key)?;
        if v.len() != 3 {
            return Err(bad("each waypoint needs three coordinates"));
        }
        out.push([v[0], v[1], v[2]]);
        rest = r[end + 1..].trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    Ok(out)
}

fn lex(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {line}: malformed section header {content:?}")))?
                .trim();
            if sections.iter().any(|s| s.name == name) {
                return Err(Error::Config(format!("line {line}: duplicate section [{name}]")));
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line}: expected `key = value`, got {content:?}")))?;
        let key = key.trim();
        let section = sections
            .last_mut()
            .ok_or_else(|| config_err(line, key, "key outside of any section"))?;
        if section.entries.contains_key(key) {
            return Err(config_err(line, key, "duplicate key"));
        }
        section.entries.insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                line,
            },
        );
    }
    Ok(sections)
}

fn parse_box(s: &mut Section, prefix: &str) -> Result<InputBox> {
    let (lk, uk) = (format!("{prefix}_lower"), format!("{prefix}_upper"));
    let line = s.entries.get(&lk).or(s.entries.get(&uk)).map_or(s.line, |e| e.line);
    let lower = s.vector(&lk)?.unwrap_or_default();
    let upper = s.vector(&uk)?.unwrap_or_default();
    InputBox::new(lower, upper).map_err(|e| config_err(line, &lk, e))
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse_str(&text, &base)
    }

    pub fn parse_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut problem = None;
        let mut grid = None;
        let mut dynamics = None;
        let mut shapes = BTreeMap::new();
        let mut solver = SolverConfig::default();
        let mut oracle = OracleConfig::default();
        let mut separation = Separation::default();
        let mut output = None;
        let mut aircraft = Vec::new();

        for mut s in lex(text)? {
            let name = s.name.clone();
            match name.as_str() {
                "problem" => {
                    let t0 = s.req_number("t0")?;
                    let t_final_line = s.entries.get("t_final").map_or(s.line, |e| e.line);
                    let t_final = s.req_number("t_final")?;
                    if t0 > t_final {
                        return Err(Error::Config(format!(
                            "line {t_final_line}: horizon: t0 = {t0} is after t_final = {t_final}"
                        )));
                    }
                    let target = s.string("target");
                    let avoid = s.string("avoid");
                    let reference = match s.take("reference") {
                        None => None,
                        Some(e) if e.value == "analytic_1d" => Some(Reference {
                            radius: s.req_number("reference_radius")?,
                            speed: s.number("reference_speed")?.unwrap_or(1.0),
                        }),
                        Some(e) => return Err(config_err(e.line, "reference", "only analytic_1d is known")),
                    };
                    problem = Some(Problem {
                        t0,
                        t_final,
                        target,
                        avoid,
                        reference,
                    });
                }
                "grid" => {
                    let min = s.req_vector("min")?;
                    let max = s.req_vector("max")?;
                    let e = s.require("nodes")?;
                    let nodes = e
                        .value
                        .split(',')
                        .map(|p| p.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| config_err(e.line, "nodes", "expected integers"))?;
                    if min.len() != max.len() || min.len() != nodes.len() {
                        return Err(config_err(e.line, "nodes", "min, max and nodes need one entry per axis"));
                    }
                    let spec = GridSpec { min, max, nodes };
                    spec.build().map_err(|err| config_err(s.line, "grid", err))?;
                    grid = Some(spec);
                }
                "dynamics" => {
                    let e = s.require("kind")?;
                    let kind = DynamicsKind::parse(&e.value)
                        .ok_or_else(|| config_err(e.line, "kind", format!("unknown dynamics {:?}", e.value)))?;
                    let control = parse_box(&mut s, "control")?;
                    let disturbance = parse_box(&mut s, "disturbance")?;
                    let (mut drift, mut cm, mut dm) = (Vec::new(), Vec::new(), Vec::new());
                    if kind == DynamicsKind::Affine {
                        let e = s.require("drift")?;
                        drift = e
                            .value
                            .split(';')
                            .map(|p| Polynomial::parse(p.trim()).map_err(|err| config_err(e.line, "drift", err)))
                            .collect::<Result<_>>()?;
                        let e = s.require("control_matrix")?;
                        cm = parse_matrix(&e.value, e.line, "control_matrix")?;
                        dm = match s.take("disturbance_matrix") {
                            Some(e) => parse_matrix(&e.value, e.line, "disturbance_matrix")?,
                            None => vec![Vec::new(); drift.len()],
                        };
                    }
                    let cfg = DynamicsConfig {
                        kind,
                        control,
                        disturbance,
                        drift,
                        control_matrix: cm,
                        disturbance_matrix: dm,
                    };
                    cfg.build().map_err(|err| config_err(e.line, "kind", err))?;
                    dynamics = Some(cfg);
                }
                "solver" => {
                    if let Some(v) = s.number("cfl")? {
                        solver.cfl = v;
                    }
                    if let Some(v) = s.integer("samples")? {
                        solver.samples = v;
                    }
                    if let Some(v) = s.integer("record_every")? {
                        solver.record_every = v;
                    }
                    if let Some(e) = s.take("mode") {
                        solver.mode = Mode::parse(&e.value)
                            .ok_or_else(|| config_err(e.line, "mode", "expected terminal or anytime"))?;
                    }
                    if let Some(e) = s.take("scheme") {
                        solver.scheme = Scheme::parse(&e.value)
                            .ok_or_else(|| config_err(e.line, "scheme", "expected lf1 or eno2"))?;
                    }
                    let opts = SolveOptions {
                        cfl_number: solver.cfl,
                        record_every: solver.record_every,
                        samples_per_axis: solver.samples,
                        ..SolveOptions::default()
                    };
                    opts.validate().map_err(|err| config_err(s.line, "solver", err))?;
                }
                "oracle" => {
                    if let Some(v) = s.boolean("enabled")? {
                        oracle.enabled = v;
                    }
                    if let Some(v) = s.integer("steps")? {
                        oracle.steps = v;
                    }
                    if let Some(v) = s.integer("control_samples")? {
                        oracle.control_samples = v;
                    }
                    if let Some(v) = s.integer("disturbance_samples")? {
                        oracle.disturbance_samples = v;
                    }
                    if oracle.steps == 0 || oracle.control_samples < 2 || oracle.disturbance_samples < 2 {
                        return Err(config_err(s.line, "oracle", "steps >= 1 and samples >= 2 required"));
                    }
                }
                "separation" => {
                    if let Some(v) = s.number("horizontal")? {
                        separation.horizontal = v;
                    }
                    if let Some(v) = s.number("height")? {
                        separation.height = v;
                    }
                    if !(separation.horizontal >= 0.0 && separation.height >= 0.0) {
                        return Err(config_err(s.line, "separation", "distances must be non-negative"));
                    }
                }
                "output" => {
                    output = s.string("dir").map(PathBuf::from);
                }
                other => {
                    if let Some(shape) = other.strip_prefix("shape.") {
                        shapes.insert(shape.to_string(), parse_shape(&mut s)?);
                    } else if let Some(ac) = other.strip_prefix("aircraft.") {
                        aircraft.push(parse_aircraft(ac, &mut s)?);
                    } else {
                        return Err(Error::Config(format!("line {}: unknown section [{other}]", s.line)));
                    }
                }
            }
            s.finish()?;
        }

        let problem = problem.ok_or_else(|| Error::Config("missing [problem] section".into()))?;
        let scenario = Scenario {
            problem,
            grid,
            dynamics,
            shapes,
            solver,
            oracle,
            separation,
            output,
            aircraft,
            base_dir: base_dir.to_path_buf(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn is_multi_aircraft(&self) -> bool {
        !self.aircraft.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let single = self.grid.is_some() || self.dynamics.is_some();
        if single && self.is_multi_aircraft() {
            return Err(Error::Config(
                "a scenario describes either one system ([grid], [dynamics]) or aircraft, not both".into(),
            ));
        }
        if !single && !self.is_multi_aircraft() {
            return Err(Error::Config("scenario has neither [grid]/[dynamics] nor aircraft".into()));
        }
        if single {
            let grid = self.grid.as_ref().ok_or_else(|| Error::Config("missing [grid] section".into()))?;
            let dynamics = self
                .dynamics
                .as_ref()
                .ok_or_else(|| Error::Config("missing [dynamics] section".into()))?;
            let dim = grid.min.len();
            let want = dynamics.kind.state_dim().unwrap_or(dynamics.drift.len());
            if want != dim {
                return Err(Error::Config(format!(
                    "[dynamics] {} has state dimension {want} but [grid] has {dim} axes",
                    dynamics.kind.name()
                )));
            }
            let target = self
                .problem
                .target
                .as_ref()
                .ok_or_else(|| Error::Config("[problem] needs `target` for a single-system scenario".into()))?;
            self.geometry(target)?.validate(dim)?;
            if let Some(avoid) = &self.problem.avoid {
                self.geometry(avoid)?.validate(dim)?;
            }
        } else {
            for a in &self.aircraft {
                let setup = self.aircraft_setup(a)?;
                let (t0, t_final) = (self.problem.t0, self.problem.t_final);
                if a.window.t_hi > t_final || a.entry_time < t0 {
                    return Err(Error::Config(format!(
                        "aircraft {}: sector time [{}, {}] lies outside the horizon [{t0}, {t_final}]",
                        a.name, a.entry_time, a.window.t_hi
                    )));
                }
                setup.validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Resolves a named shape into a geometry tree.
    pub fn geometry(&self, name: &str) -> Result<GeometrySpec> {
        self.geometry_inner(name, &mut Vec::new())
    }

    fn geometry_inner(&self, name: &str, stack: &mut Vec<String>) -> Result<GeometrySpec> {
        if stack.iter().any(|s| s == name) {
            return Err(Error::Config(format!("shape {name} refers to itself")));
        }
        let shape = self
            .shapes
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown shape {name:?}")))?;
        stack.push(name.to_string());
        let out = match shape {
            ShapeConfig::Box { lower, upper } => GeometrySpec::boxed(lower.clone(), upper.clone()),
            ShapeConfig::Cylinder {
                axis,
                center,
                radius,
                half_height,
            } => GeometrySpec::Cylinder {
                axis: *axis,
                center: center.clone(),
                radius: *radius,
                half_height: *half_height,
            },
            ShapeConfig::Union(parts) => GeometrySpec::Union(
                parts
                    .iter()
                    .map(|p| self.geometry_inner(p, stack))
                    .collect::<Result<_>>()?,
            ),
            ShapeConfig::Intersection(parts) => GeometrySpec::Intersection(
                parts
                    .iter()
                    .map(|p| self.geometry_inner(p, stack))
                    .collect::<Result<_>>()?,
            ),
            ShapeConfig::Complement(inner) => GeometrySpec::complement(self.geometry_inner(inner, stack)?),
        };
        stack.pop();
        Ok(out)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            cfl_number: self.solver.cfl,
            record_every: self.solver.record_every,
            mode: self.solver.mode,
            scheme: self.solver.scheme,
            samples_per_axis: self.solver.samples,
            stops: Vec::new(),
        }
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            cfl_number: self.solver.cfl,
            scheme: self.solver.scheme,
            samples_per_axis: self.solver.samples,
            record_every: self.solver.record_every,
            separation: self.separation,
            horizon: Some((self.problem.t0, self.problem.t_final)),
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn aircraft_setup(&self, a: &AircraftConfig) -> Result<AircraftSetup> {
        let profiles = ProfileSet::load(&self.resolve(&a.profile))?;
        let model = AircraftModel::new(
            a.waypoints.clone(),
            profiles,
            a.gamma_max,
            a.speed_fraction,
            a.wind_bound,
        )
        .map_err(|e| Error::Config(format!("aircraft {}: {e}", a.name)))?;
        let grid = Grid::uniform(&[
            (a.s_range.0, a.s_range.1, a.nodes.0),
            (a.z_range.0, a.z_range.1, a.nodes.1),
        ])
        .map_err(|e| Error::Config(format!("aircraft {}: {e}", a.name)))?;
        Ok(AircraftSetup {
            name: a.name.clone(),
            model: Arc::new(model),
            grid: Arc::new(grid),
            window: a.window.clone(),
            entry_time: a.entry_time,
        })
    }

    pub fn aircraft_setups(&self) -> Result<Vec<AircraftSetup>> {
        self.aircraft.iter().map(|a| self.aircraft_setup(a)).collect()
    }

    /// Writes the scenario back as text; parsing the result gives an equal
    /// scenario (given the same base directory).
    pub fn serialize(&self) -> String {
        let mut o = String::new();
        let vec = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let p = &self.problem;
        let _ = writeln!(o, "[problem]\nt0 = {:?}\nt_final = {:?}", p.t0, p.t_final);
        if let Some(t) = &p.target {
            let _ = writeln!(o, "target = {t}");
        }
        if let Some(a) = &p.avoid {
            let _ = writeln!(o, "avoid = {a}");
        }
        if let Some(r) = &p.reference {
            let _ = writeln!(
                o,
                "reference = analytic_1d\nreference_radius = {:?}\nreference_speed = {:?}",
                r.radius, r.speed
            );
        }
        if let Some(g) = &self.grid {
            let nodes: Vec<String> = g.nodes.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(
                o,
                "\n[grid]\nmin = {}\nmax = {}\nnodes = {}",
                vec(&g.min),
                vec(&g.max),
                nodes.join(", ")
            );
        }
        if let Some(d) = &self.dynamics {
            let _ = writeln!(o, "\n[dynamics]\nkind = {}", d.kind.name());
            let _ = writeln!(o, "control_lower = {}\ncontrol_upper = {}", vec(d.control.lower()), vec(d.control.upper()));
            if d.disturbance.dim() > 0 {
                let _ = writeln!(
                    o,
                    "disturbance_lower = {}\ndisturbance_upper = {}",
                    vec(d.disturbance.lower()),
                    vec(d.disturbance.upper())
                );
            }
            if d.kind == DynamicsKind::Affine {
                let polys = |ps: &[Polynomial]| ps.iter().map(|p| p.to_string()).collect::<Vec<_>>();
                let matrix = |m: &[Vec<Polynomial>]| m.iter().map(|r| polys(r).join(", ")).collect::<Vec<_>>().join("; ");
                let _ = writeln!(o, "drift = {}", polys(&d.drift).join("; "));
                let _ = writeln!(o, "control_matrix = {}", matrix(&d.control_matrix));
                let _ = writeln!(o, "disturbance_matrix = {}", matrix(&d.disturbance_matrix));
            }
        }
        for (name, s) in &self.shapes {
            let _ = writeln!(o, "\n[shape.{name}]");
            let _ = match s {
                ShapeConfig::Box { lower, upper } => {
                    writeln!(o, "kind = box\nlower = {}\nupper = {}", vec(lower), vec(upper))
                }
                ShapeConfig::Cylinder {
                    axis,
                    center,
                    radius,
                    half_height,
                } => writeln!(
                    o,
                    "kind = cylinder\naxis = {axis}\ncenter = {}\nradius = {radius:?}\nhalf_height = {half_height:?}",
                    vec(center)
                ),
                ShapeConfig::Union(parts) => writeln!(o, "kind = union\nof = {}", parts.join(", ")),
                ShapeConfig::Intersection(parts) => writeln!(o, "kind = intersection\nof = {}", parts.join(", ")),
                ShapeConfig::Complement(inner) => writeln!(o, "kind = complement\nof = {inner}"),
            };
        }
        let s = &self.solver;
        let _ = writeln!(
            o,
            "\n[solver]\ncfl = {:?}\nsamples = {}\nrecord_every = {}\nmode = {}\nscheme = {}",
            s.cfl,
            s.samples,
            s.record_every,
            s.mode.name(),
            s.scheme.name()
        );
        let r = &self.oracle;
        let _ = writeln!(
            o,
            "\n[oracle]\nenabled = {}\nsteps = {}\ncontrol_samples = {}\ndisturbance_samples = {}",
            r.enabled, r.steps, r.control_samples, r.disturbance_samples
        );
        let _ = writeln!(
            o,
            "\n[separation]\nhorizontal = {:?}\nheight = {:?}",
            self.separation.horizontal, self.separation.height
        );
        if let Some(dir) = &self.output {
            let _ = writeln!(o, "\n[output]\ndir = {}", dir.display());
        }
        for a in &self.aircraft {
            let wps: Vec<String> = a
                .waypoints
                .iter()
                .map(|w| format!("({:?}, {:?}, {:?})", w[0], w[1], w[2]))
                .collect();
            let w = &a.window;
            let _ = writeln!(
                o,
                "\n[aircraft.{}]\nwaypoints = {}\nentry_time = {:?}\nprofile = {}\ngamma_max = {:?}\nspeed_fraction = {:?}\nwind_bound = {}",
                a.name,
                wps.join(", "),
                a.entry_time,
                a.profile.display(),
                a.gamma_max,
                a.speed_fraction,
                vec(&a.wind_bound)
            );
            let _ = writeln!(
                o,
                "tw_kind = {}\ntw_waypoint = {}\ntw_lower = {:?}\ntw_upper = {:?}\ntw_t_lo = {:?}\ntw_t_hi = {:?}",
                w.kind.name(),
                w.waypoint,
                w.lower,
                w.upper,
                w.t_lo,
                w.t_hi
            );
            let _ = writeln!(
                o,
                "s_range = {:?}, {:?}\nz_range = {:?}, {:?}\nnodes = {}, {}",
                a.s_range.0, a.s_range.1, a.z_range.0, a.z_range.1, a.nodes.0, a.nodes.1
            );
        }
        o
    }
}

fn parse_shape(s: &mut Section) -> Result<ShapeConfig> {
    let e = s.require("kind")?;
    let names = |s: &mut Section| -> Result<Vec<String>> {
        let e = s.require("of")?;
        let v: Vec<String> = e.value.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect();
        if v.is_empty() {
            return Err(config_err(e.line, "of", "needs at least one shape"));
        }
        Ok(v)
    };
    Ok(match e.value.as_str() {
        "box" => ShapeConfig::Box {
            lower: s.req_vector("lower")?,
            upper: s.req_vector("upper")?,
        },
        "cylinder" => ShapeConfig::Cylinder {
            axis: s
                .integer("axis")?
                .ok_or_else(|| config_err(s.line, "axis", "cylinder needs an axis"))?,
            center: s.req_vector("center")?,
            radius: s.req_number("radius")?,
            half_height: s.req_number("half_height")?,
        },
        "union" => ShapeConfig::Union(names(s)?),
        "intersection" => ShapeConfig::Intersection(names(s)?),
        "complement" => {
            let v = names(s)?;
            if v.len() != 1 {
                return Err(config_err(e.line, "of", "complement takes exactly one shape"));
            }
            ShapeConfig::Complement(v[0].clone())
        }
        other => return Err(config_err(e.line, "kind", format!("unknown shape kind {other:?}"))),
    })
}

fn pair(s: &mut Section, key: &str) -> Result<(f64, f64)> {
    let line = s.entries.get(key).map_or(s.line, |e| e.line);
    let v = s.req_vector(key)?;
    if v.len() != 2 {
        return Err(config_err(line, key, "expected two values"));
    }
    Ok((v[0], v[1]))
}

fn parse_aircraft(name: &str, s: &mut Section) -> Result<AircraftConfig> {
    let e = s.require("waypoints")?;
    let waypoints = parse_waypoints(&e.value, e.line, "waypoints")?;
    let entry_time = s.req_number("entry_time")?;
    let profile = PathBuf::from(s.require("profile")?.value);
    let gamma_max = s.number("gamma_max")?.unwrap_or(MAX_PATH_ANGLE);
    let speed_fraction = s.number("speed_fraction")?.unwrap_or(DEFAULT_SPEED_FRACTION);
    let wl = s.entries.get("wind_bound").map_or(s.line, |e| e.line);
    let wind = s.vector("wind_bound")?.unwrap_or_else(|| vec![12.0, 12.0, 0.0]);
    if wind.len() != 3 {
        return Err(config_err(wl, "wind_bound", "expected three components"));
    }
    let e = s.require("tw_kind")?;
    let kind = WindowKind::parse(&e.value)
        .ok_or_else(|| config_err(e.line, "tw_kind", "expected adjacent or superimposed"))?;
    let waypoint = s
        .integer("tw_waypoint")?
        .unwrap_or(waypoints.len().saturating_sub(1));
    let window = TargetWindow {
        kind,
        waypoint,
        lower: s.req_number("tw_lower")?,
        upper: s.req_number("tw_upper")?,
        t_lo: s.req_number("tw_t_lo")?,
        t_hi: s.req_number("tw_t_hi")?,
    };
    let s_range = pair(s, "s_range")?;
    let z_range = pair(s, "z_range")?;
    let e = s.require("nodes")?;
    let n: Vec<usize> = e
        .value
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| config_err(e.line, "nodes", "expected two integers"))?;
    if n.len() != 2 {
        return Err(config_err(e.line, "nodes", "expected two integers"));
    }
    Ok(AircraftConfig {
        name: name.to_string(),
        waypoints,
        entry_time,
        profile,
        gamma_max,
        speed_fraction,
        wind_bound: [wind[0], wind[1], wind[2]],
        window,
        s_range,
        z_range,
        nodes: (n[0], n[1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[problem]
t0 = 0
t_final = 1s
target = goal

[grid]
min = -2
max = 2
nodes = 401

[dynamics]
kind = integrator1d
control_lower = -1
control_upper = 1

[shape.goal]
kind = box
lower = -0.5
upper = 0.5
";

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = Scenario::parse_str(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(s.solver, SolverConfig::default());
        assert_eq!(s.solver.cfl, 0.5);
        assert_eq!(s.solver.samples, 3);
        assert_eq!(s.solver.record_every, 1);
        assert_eq!(s.grid.as_ref().unwrap().nodes, vec![401]);
        assert!(!s.is_multi_aircraft());
    }

    #[test]
    fn reversed_horizon_names_horizon() {
        let text = MINIMAL.replace("t0 = 0", "t0 = 5");
        let err = Scenario::parse_str(&text, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("horizon"), "{err}");
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let text = MINIMAL.replace("nodes = 401", "nodes = 401\nspacing = 0.1");
        let err = Scenario::parse_str(&text, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("spacing") && err.contains("line 10"), "{err}");
        let text = MINIMAL.replace("nodes = 401", "nodes = 401\nnodes = 3");
        let err = Scenario::parse_str(&text, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
    }

    #[test]
    fn missing_and_mistyped_values() {
        let text = MINIMAL.replace("max = 2\n", "");
        let err = Scenario::parse_str(&text, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("`max`"), "{err}");
        let text = MINIMAL.replace("max = 2", "max = two");
        let err = Scenario::parse_str(&text, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("line 8") && err.contains("`max`"), "{err}");
    }

    #[test]
    fn units_convert_to_si() {
        assert_eq!(parse_quantity("5nmi"), Some(9260.0));
        assert!((parse_quantity("2000ft").unwrap() - 609.6).abs() < 1e-9);
        assert_eq!(parse_quantity("40km"), Some(40_000.0));
        assert_eq!(parse_quantity("2min"), Some(120.0));
        assert!((parse_quantity("5deg").unwrap() - MAX_PATH_ANGLE).abs() < 1e-15);
        assert_eq!(parse_quantity("1e-3"), Some(1e-3));
        assert_eq!(parse_quantity("nan"), None);
        assert_eq!(parse_quantity("km"), None);
    }

    #[test]
    fn round_trip_single_system() {
        let text = MINIMAL.to_string()
            + "\n[shape.wall]\nkind = cylinder\naxis = 0\ncenter = 1.2\nradius = 0.1\nhalf_height = 0.2\n\
               \n[shape.both]\nkind = union\nof = goal, wall\n\n[shape.outside]\nkind = complement\nof = both\n\
               \n[oracle]\nenabled = true\nsteps = 10\n";
        let a = Scenario::parse_str(&text, Path::new("/tmp")).unwrap();
        let b = Scenario::parse_str(&a.serialize(), Path::new("/tmp")).unwrap();
        assert_eq!(a, b);
        assert!(a.geometry("outside").is_ok());
    }

    #[test]
    fn round_trip_affine() {
        let text = "\
[problem]
t0 = 0
t_final = 0.5
target = goal
avoid = wall

[grid]
min = -1, -1
max = 1, 1
nodes = 21, 21

[dynamics]
kind = affine
drift = x1; -0.5*x0^3
control_matrix = 0; 1 + x0^2
disturbance_matrix = 0.1; 0
control_lower = -1
control_upper = 1
disturbance_lower = -0.2
disturbance_upper = 0.2

[shape.goal]
kind = box
lower = -0.2, -0.2
upper = 0.2, 0.2

[shape.wall]
kind = box
lower = 0.5, -1
upper = 0.6, 1

[solver]
mode = anytime
scheme = eno2
";
        let a = Scenario::parse_str(text, Path::new(".")).unwrap();
        assert_eq!(a.solver.mode, Mode::Anytime);
        let b = Scenario::parse_str(&a.serialize(), Path::new(".")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn self_referencing_shapes_fail() {
        let text = MINIMAL.replace("[shape.goal]\nkind = box\nlower = -0.5\nupper = 0.5", "[shape.goal]\nkind = complement\nof = goal");
        assert!(Scenario::parse_str(&text, Path::new(".")).is_err());
    }

    #[test]
    fn dimension_mismatch_between_grid_and_dynamics() {
        let text = MINIMAL.replace("integrator1d", "game2d");
        assert!(Scenario::parse_str(&text, Path::new(".")).is_err());
    }
}
