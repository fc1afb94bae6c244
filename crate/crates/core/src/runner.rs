//! Run orchestration and file export.
//!
//! Every run writes into one output directory:
//!
//! ```text
//! manifest.txt            key = value lines
//! scenario.txt            the scenario as parsed
//! tube/index.csv          time,filename
//! tube/frame_00000.csv    one value field per recorded time
//! contours/frame_00000.csv
//! conflicts.txt           algorithm1 only
//! ```
//!
//! Multi-aircraft runs put `tube/` and `contours/` under one directory per
//! aircraft. Apart from `manifest.txt`, which carries timings, the output
//! only depends on the scenario.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::grid::{implicit_field, read_field_csv, write_field_csv, ScalarField};
use crate::oracle::{compare_tubes, dp_solve, mismatches_in_band, OracleOptions};
use crate::reach_avoid::{run_algorithm1, sublevel_set, ConflictEvent, ReachAvoidResult, NO_OBSTACLE};
use crate::scenario::Scenario;
use crate::solver::{solve, ValueTube};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Algorithm1,
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Algorithm1 => "algorithm1",
            Command::Oracle => "oracle",
        }
    }
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn parse(text: &str) -> Manifest {
        let mut m = Manifest::default();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                m.push(k.trim(), v.trim());
            }
        }
        m
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Writes `index.csv` and one field CSV per frame into `dir`; returns the
/// written paths relative to `root`.
pub fn write_tube<'a>(
    frames: impl Iterator<Item = (f64, &'a ScalarField)>,
    dir: &Path,
    root: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut index = String::from("time,filename\n");
    let mut files = Vec::new();
    for (k, (t, field)) in frames.enumerate() {
        let name = format!("frame_{k:05}.csv");
        let path = dir.join(&name);
        let mut w = create(&path)?;
        write_field_csv(field, &mut w)?;
        w.flush()?;
        let _ = writeln!(index, "{t:.16e},{name}");
        files.push(relative(&path, root));
    }
    let index_path = dir.join("index.csv");
    fs::write(&index_path, index)?;
    files.insert(0, relative(&index_path, root));
    Ok(files)
}

/// Reads a tube written by [`write_tube`].
pub fn read_tube(dir: &Path) -> Result<ValueTube> {
    let index = fs::read_to_string(dir.join("index.csv"))?;
    let mut tube: Option<ValueTube> = None;
    for (n, line) in index.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (t, name) = line
            .split_once(',')
            .ok_or_else(|| Error::InvalidArgument(format!("index.csv line {}: expected time,filename", n + 1)))?;
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("index.csv line {}: bad time {t:?}", n + 1)))?;
        let file = fs::File::open(dir.join(name.trim()))?;
        let field = read_field_csv(BufReader::new(file))?;
        let tube = tube.get_or_insert_with(|| ValueTube::new(field.grid().clone()));
        let field = ScalarField::new(tube.grid().clone(), field.into_values())?;
        tube.push(t, field)?;
    }
    tube.ok_or_else(|| Error::InvalidArgument(format!("{}: empty tube", dir.display())))
}

/// Contour of `{V <= 0}` as CSV rows `piece,closed,axis0,...`.
pub fn write_contours<'a>(
    frames: impl Iterator<Item = (f64, &'a ScalarField)>,
    dir: &Path,
    root: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (k, (_, field)) in frames.enumerate() {
        let path = dir.join(format!("frame_{k:05}.csv"));
        let mut w = create(&path)?;
        let axes: Vec<String> = (0..field.grid().dim()).map(|i| format!("axis{i}")).collect();
        writeln!(w, "piece,closed,{}", axes.join(","))?;
        for (piece, poly) in sublevel_set(field, 0.0).contours.iter().enumerate() {
            for p in &poly.points {
                let coords: Vec<String> = p.iter().map(|c| format!("{c:.16e}")).collect();
                writeln!(w, "{piece},{},{}", poly.closed as u8, coords.join(","))?;
            }
        }
        w.flush()?;
        files.push(relative(&path, root));
    }
    Ok(files)
}

fn relative(path: &Path, root: &Path) -> PathBuf {
    path.strip_prefix(root).unwrap_or(path).to_path_buf()
}

/// One line per conflict event.
pub fn conflict_report(result: &ReachAvoidResult) -> String {
    let name = |k: usize| result.aircraft[k].name.as_str();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",");
    let mut out = String::from("# time aircraft intruder nodes lower upper\n");
    for ConflictEvent {
        time,
        aircraft,
        intruder,
        nodes,
        lower,
        upper,
    } in &result.conflicts
    {
        let _ = writeln!(
            out,
            "{time:.6} {} {} {nodes} {} {}",
            name(*aircraft),
            name(*intruder),
            fmt(lower),
            fmt(upper)
        );
    }
    out
}

/// Analytic 1D reach value `max(0, |x| - speed tau) - radius`.
pub fn analytic_reach_1d(x: f64, tau: f64, radius: f64, speed: f64) -> f64 {
    (x.abs() - speed * tau).max(0.0) - radius
}

struct SingleSystem {
    l: ScalarField,
    h: ScalarField,
}

fn single_system(s: &Scenario) -> Result<SingleSystem> {
    let grid = s
        .grid
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs a single-system scenario".into()))?
        .build()?;
    let target = s.problem.target.as_deref().unwrap_or_default();
    let l = implicit_field(&grid, &s.geometry(target)?)?;
    let h = match &s.problem.avoid {
        Some(a) => implicit_field(&grid, &s.geometry(a)?)?,
        None => ScalarField::constant(grid, NO_OBSTACLE)?,
    };
    Ok(SingleSystem { l, h })
}

fn oracle_options(s: &Scenario) -> OracleOptions {
    OracleOptions {
        dt: (s.problem.t_final - s.problem.t0) / s.oracle.steps as f64,
        control_samples: s.oracle.control_samples,
        disturbance_samples: s.oracle.disturbance_samples,
        mode: s.solver.mode,
    }
}

/// Solves with extra stops on the oracle's time grid and compares.
fn oracle_comparison(s: &Scenario, sys: &SingleSystem, oracle: &ValueTube, m: &mut Manifest) -> Result<()> {
    let dynamics = s.dynamics.as_ref().ok_or_else(|| Error::Config("missing [dynamics]".into()))?.build()?;
    let mut opts = s.solve_options();
    opts.stops = oracle.times().to_vec();
    let pde = solve(dynamics, &sys.l, &sys.h, s.problem.t_final, s.problem.t0, &opts)?;
    let pde = pde.select(oracle.times())?;
    let (linf, mismatch) = compare_tubes(&pde, oracle)?;
    let band_ok = pde
        .fields()
        .iter()
        .zip(oracle.fields())
        .map(|(a, b)| mismatches_in_band(a, b))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .all(|ok| ok);
    m.push("oracle_linf", format!("{linf:e}"));
    m.push("oracle_mask_mismatch", mismatch);
    m.push("oracle_band_ok", band_ok);
    Ok(())
}

fn check_sizes(path: &Path, files: &[PathBuf]) -> Result<()> {
    for f in files {
        let len = fs::metadata(path.join(f))?.len();
        if len == 0 {
            return Err(Error::Io(format!("{} was written empty", f.display())));
        }
    }
    Ok(())
}

/// Runs `command` on `scenario`, writing everything under `out`. The
/// returned manifest is also written to `out/manifest.txt`.
pub fn run(command: Command, scenario: &Scenario, out: &Path) -> Result<Manifest> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let mut m = Manifest::default();
    m.push("command", command.name());
    m.push("t0", format!("{:?}", scenario.problem.t0));
    m.push("t_final", format!("{:?}", scenario.problem.t_final));
    m.push("cfl", format!("{:?}", scenario.solver.cfl));
    m.push("samples", scenario.solver.samples);
    m.push("record_every", scenario.solver.record_every);
    m.push("mode", scenario.solver.mode.name());
    m.push("scheme", scenario.solver.scheme.name());
    let mut files = vec![PathBuf::from("scenario.txt")];
    fs::write(out.join("scenario.txt"), scenario.serialize())?;
    let mut warnings: Vec<String> = Vec::new();

    match command {
        Command::Solve | Command::Oracle => {
            if scenario.is_multi_aircraft() {
                return Err(Error::Config(format!("`{}` needs a single-system scenario", command.name())));
            }
            let sys = single_system(scenario)?;
            let grid = sys.l.grid().clone();
            let axes: Vec<String> = grid
                .axes()
                .iter()
                .map(|a| format!("[{:?}, {:?}] x {}", a.min, a.max, a.nodes))
                .collect();
            m.push("grid", axes.join("; "));
            let dynamics = scenario
                .dynamics
                .as_ref()
                .ok_or_else(|| Error::Config("missing [dynamics]".into()))?
                .build()?;
            let (t0, t_final) = (scenario.problem.t0, scenario.problem.t_final);
            let tube = if command == Command::Solve {
                let t = Instant::now();
                let tube = solve(dynamics, &sys.l, &sys.h, t_final, t0, &scenario.solve_options())?;
                m.push("solve_seconds", format!("{:.3}", t.elapsed().as_secs_f64()));
                m.push("steps", tube.steps);
                tube
            } else {
                let t = Instant::now();
                let tube = dp_solve(dynamics, &sys.l, &sys.h, t_final, t0, &oracle_options(scenario))?;
                m.push("oracle_seconds", format!("{:.3}", t.elapsed().as_secs_f64()));
                tube
            };
            warnings.extend(tube.warnings.iter().cloned());
            if let Some(r) = &scenario.problem.reference {
                if grid.dim() != 1 {
                    return Err(Error::Config("analytic_1d reference needs a 1D grid".into()));
                }
                let (t, v) = tube.last().ok_or_else(|| Error::InvalidArgument("empty tube".into()))?;
                let tau = t_final - t;
                let exact = ScalarField::from_fn(grid.clone(), |x| analytic_reach_1d(x[0], tau, r.radius, r.speed))?;
                let err = v
                    .values()
                    .iter()
                    .zip(exact.values())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                m.push("reference_linf", format!("{err:e}"));
                m.push("reference_tau", format!("{tau:?}"));
            }
            if command == Command::Oracle {
                oracle_comparison(scenario, &sys, &tube, &mut m)?;
            } else if scenario.oracle.enabled {
                let t = Instant::now();
                let dynamics = scenario.dynamics.as_ref().expect("checked above").build()?;
                let oracle = dp_solve(dynamics, &sys.l, &sys.h, t_final, t0, &oracle_options(scenario))?;
                warnings.extend(oracle.warnings.iter().cloned());
                oracle_comparison(scenario, &sys, &oracle, &mut m)?;
                m.push("oracle_seconds", format!("{:.3}", t.elapsed().as_secs_f64()));
            }
            if let Some((_, v)) = tube.last() {
                m.push("final_min", format!("{:?}", v.min_value()));
                m.push("final_max", format!("{:?}", v.max_value()));
            }
            files.extend(write_tube(tube.frames(), &out.join("tube"), out)?);
            files.extend(write_contours(tube.frames(), &out.join("contours"), out)?);
        }
        Command::Algorithm1 => {
            if !scenario.is_multi_aircraft() {
                return Err(Error::Config("`algorithm1` needs a scenario with aircraft".into()));
            }
            let setups = scenario.aircraft_setups()?;
            let t = Instant::now();
            let result = run_algorithm1(&setups, &scenario.sweep_options())?;
            m.push("algorithm1_seconds", format!("{:.3}", t.elapsed().as_secs_f64()));
            m.push("aircraft", setups.len());
            m.push("steps", result.schedule.len().saturating_sub(1));
            m.push("conflict_events", result.conflicts.len());
            warnings.extend(result.warnings.iter().cloned());
            for (a, setup) in result.aircraft.iter().zip(&setups) {
                let axes: Vec<String> = setup
                    .grid
                    .axes()
                    .iter()
                    .map(|x| format!("[{:?}, {:?}] x {}", x.min, x.max, x.nodes))
                    .collect();
                m.push(format!("grid.{}", a.name), axes.join("; "));
                let dir = out.join(format!("aircraft_{}", a.name));
                files.extend(write_tube(a.frames(), &dir.join("tube"), out)?);
                files.extend(write_contours(a.frames(), &dir.join("contours"), out)?);
                files.extend(write_tube(a.obstacle.frames(), &dir.join("obstacle"), out)?);
            }
            fs::write(out.join("conflicts.txt"), conflict_report(&result))?;
            files.push(PathBuf::from("conflicts.txt"));
        }
    }

    m.push("warnings", warnings.len());
    for w in &warnings {
        m.push("warning", w.replace('\n', " "));
    }
    check_sizes(out, &files)?;
    for f in &files {
        m.push("file", f.display());
    }
    m.push("total_seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
    fs::write(out.join("manifest.txt"), m.render())?;
    Ok(m)
}

/// Compares two exported tubes; the result is `(linf, mask mismatches)`.
pub fn diff(a: &Path, b: &Path) -> Result<(f64, usize)> {
    compare_tubes(&read_tube(a)?, &read_tube(b)?)
}

/// Writes `error.txt` describing a failed run.
pub fn write_diagnostic(out: &Path, command: &str, err: &Error) -> std::io::Result<()> {
    fs::create_dir_all(out)?;
    let kind = if err.is_numerical() { "numerical" } else { "validation" };
    fs::write(
        out.join("error.txt"),
        format!("command = {command}\nkind = {kind}\nerror = {err}\n"),
    )
}
