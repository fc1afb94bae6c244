//! Reach-avoid sets for aircraft with Target Windows.
//!
//! Each aircraft is solved on its own `(sigma, z)` grid. Stage 1 runs the
//! anytime (freezing) equation over the window interval `[t_lo, t_hi]`
//! from the signed distance to the window region. Stage 2 continues from
//! the Stage 1 field at `t_lo` with the terminal-time equation back to the
//! sector entry time. All aircraft share one backward sweep: after every
//! step the current zero-sublevel sets are compared pairwise, and each
//! conflict set becomes a box obstacle for the aircraft it belongs to.

mod conflict;
mod sublevel;

use std::sync::Arc;

pub use conflict::{
    conflict_detect, inflated_bounds, obstacle_field, occupied_nodes, ConflictZone, Separation,
    FT, NMI, NO_OBSTACLE,
};
pub use sublevel::{sublevel_mask, sublevel_set, Polyline, Sublevel};

use conflict::{conflict_mask, zone_from_mask, Occupancy};

use crate::dynamics::{per_axis_speed_bound, AircraftDynamics, AircraftModel, DynamicsRef, FlightPhase};
use crate::error::{Error, Result};
use crate::grid::{box_distance, field_max, Grid, ScalarField};
use crate::hamiltonian::{HamMode, HamiltonianSpec, DEFAULT_INPUT_SAMPLES};
use crate::solver::{advance, boundary_touch, cfl_dt, landing_times, step_time, uniform_steps, Scheme, ValueTube};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    /// Fixed along-track position, altitude band.
    Adjacent,
    /// Fixed altitude, along-track band.
    Superimposed,
}

impl WindowKind {
    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Adjacent => "adjacent",
            WindowKind::Superimposed => "superimposed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "adjacent" => Some(WindowKind::Adjacent),
            "superimposed" => Some(WindowKind::Superimposed),
            _ => None,
        }
    }
}

/// Spatial and temporal constraint centred on a waypoint. `lower` and
/// `upper` are offsets from the waypoint in the free coordinate: altitude
/// for adjacent windows, along-track distance for superimposed ones.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetWindow {
    pub kind: WindowKind,
    pub waypoint: usize,
    pub lower: f64,
    pub upper: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl TargetWindow {
    pub fn validate(&self, model: &AircraftModel) -> Result<()> {
        if self.waypoint >= model.waypoints().len() {
            return Err(Error::InvalidArgument(format!(
                "window waypoint {} does not exist ({} waypoints)",
                self.waypoint,
                model.waypoints().len()
            )));
        }
        if !(self.lower <= self.upper) {
            return Err(Error::InvalidArgument(format!(
                "window bounds must be ordered, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        if !(self.t_lo <= self.t_hi) {
            return Err(Error::InvalidArgument(format!(
                "window times must be ordered, got [{}, {}]",
                self.t_lo, self.t_hi
            )));
        }
        Ok(())
    }

    /// Window region in `(sigma, z)`; the fixed coordinate gets a band of
    /// half a grid cell on each side so the region contains grid nodes.
    pub fn region(&self, model: &AircraftModel, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
        let d = model.waypoint_offset(self.waypoint);
        let z = model.waypoints()[self.waypoint][2];
        match self.kind {
            WindowKind::Adjacent => {
                let band = 0.5 * grid.spacing(0);
                (vec![d - band, z + self.lower], vec![d + band, z + self.upper])
            }
            WindowKind::Superimposed => {
                let band = 0.5 * grid.spacing(1);
                (vec![d + self.lower, z - band], vec![d + self.upper, z + band])
            }
        }
    }

    /// Signed distance to the window region.
    pub fn target_field(&self, model: &AircraftModel, grid: &Arc<Grid>) -> Result<ScalarField> {
        let (lo, hi) = self.region(model, grid);
        ScalarField::from_fn(grid.clone(), |x| box_distance(&lo, &hi, x))
    }
}

/// One aircraft of a multi-aircraft run.
#[derive(Debug, Clone)]
pub struct AircraftSetup {
    pub name: String,
    pub model: Arc<AircraftModel>,
    pub grid: Arc<Grid>,
    pub window: TargetWindow,
    pub entry_time: f64,
}

impl AircraftSetup {
    pub fn validate(&self) -> Result<()> {
        if self.grid.dim() != 2 {
            return Err(Error::InvalidArgument(format!(
                "aircraft {} needs a 2D (sigma, z) grid",
                self.name
            )));
        }
        self.window.validate(&self.model)?;
        if !(self.entry_time <= self.window.t_lo) {
            return Err(Error::InvalidArgument(format!(
                "aircraft {}: window opens at {} before sector entry at {}",
                self.name, self.window.t_lo, self.entry_time
            )));
        }
        Ok(())
    }

    /// Whether the aircraft is in the sector at `t`.
    pub fn in_sector(&self, t: f64) -> bool {
        self.entry_time <= t && t <= self.window.t_hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub cfl_number: f64,
    pub scheme: Scheme,
    pub samples_per_axis: usize,
    pub record_every: usize,
    pub separation: Separation,
    /// Scenario horizon `[t0, T]` every window and entry must lie in.
    pub horizon: Option<(f64, f64)>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            cfl_number: 0.5,
            scheme: Scheme::LaxFriedrichs1,
            samples_per_axis: DEFAULT_INPUT_SAMPLES,
            record_every: 1,
            separation: Separation::default(),
            horizon: None,
        }
    }
}

/// One non-empty conflict set: at `time`, aircraft `aircraft` states in
/// the box `[lower, upper]` may lose separation with `intruder`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictEvent {
    pub time: f64,
    pub aircraft: usize,
    pub intruder: usize,
    pub nodes: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AircraftResult {
    pub name: String,
    /// Anytime-mode tube over `[t_lo, t_hi]`.
    pub stage1: ValueTube,
    /// Terminal-mode tube over `[entry, t_lo]`; its first frame is the last
    /// Stage 1 frame.
    pub stage2: ValueTube,
    /// Obstacle `h_j` at every recorded time, `t_hi` down to entry.
    pub obstacle: ValueTube,
}

impl AircraftResult {
    /// All recorded frames from `t_hi` down to entry, the handoff frame once.
    pub fn frames(&self) -> impl Iterator<Item = (f64, &ScalarField)> {
        self.stage1.frames().chain(self.stage2.frames().skip(1))
    }
}

#[derive(Debug, Clone)]
pub struct ReachAvoidResult {
    pub aircraft: Vec<AircraftResult>,
    pub conflicts: Vec<ConflictEvent>,
    pub schedule: Vec<f64>,
    pub warnings: Vec<String>,
}

/// A precomputed tube treated as a moving obstacle source.
#[derive(Debug, Clone)]
pub struct Intruder {
    pub model: Arc<AircraftModel>,
    pub tube: ValueTube,
}

fn dynamics_of(setup: &AircraftSetup) -> DynamicsRef {
    Arc::new(AircraftDynamics::new(setup.model.clone()))
}

/// Shared time grid for a sweep: from the latest window close down to the
/// earliest entry, landing on every window bound and entry time, with a
/// step no longer than the tightest aircraft CFL limit.
pub fn schedule(aircraft: &[AircraftSetup], opts: &SweepOptions) -> Result<Vec<f64>> {
    if aircraft.is_empty() {
        return Err(Error::InvalidArgument("no aircraft to solve".into()));
    }
    let mut dt_max = f64::INFINITY;
    for a in aircraft {
        a.validate()?;
        if let Some((t0, t_final)) = opts.horizon {
            if a.window.t_hi > t_final || a.entry_time < t0 {
                return Err(Error::Config(format!(
                    "aircraft {}: sector time [{}, {}] lies outside the horizon [{t0}, {t_final}]",
                    a.name, a.entry_time, a.window.t_hi
                )));
            }
        }
        let alpha = per_axis_speed_bound(dynamics_of(a).as_ref(), &a.grid)?;
        dt_max = dt_max.min(cfl_dt(&a.grid, &alpha, opts.cfl_number));
    }
    let top = aircraft.iter().map(|a| a.window.t_hi).fold(f64::NEG_INFINITY, f64::max);
    let bottom = aircraft.iter().map(|a| a.entry_time).fold(f64::INFINITY, f64::min);
    let stops: Vec<f64> = aircraft
        .iter()
        .flat_map(|a| [a.window.t_hi, a.window.t_lo, a.entry_time])
        .collect();
    let mut times = vec![top];
    let mut t = top;
    for stop in landing_times(&stops, top, bottom) {
        let (n, dt) = uniform_steps(t, stop, dt_max);
        for k in 1..=n {
            times.push(step_time(t, stop, k, n, dt));
        }
        t = stop;
    }
    Ok(times)
}

struct Track<'a> {
    setup: &'a AircraftSetup,
    alpha: Vec<f64>,
    standard: HamiltonianSpec,
    frozen: HamiltonianSpec,
    target: ScalarField,
    no_obstacle: ScalarField,
    value: Option<ScalarField>,
    stage1: ValueTube,
    stage2: ValueTube,
    obstacle: ValueTube,
    touched: Option<f64>,
}

impl<'a> Track<'a> {
    fn new(setup: &'a AircraftSetup, opts: &SweepOptions) -> Result<Self> {
        let dynamics = dynamics_of(setup);
        let standard = HamiltonianSpec::new(dynamics.clone(), opts.samples_per_axis, HamMode::Standard)?;
        Ok(Self {
            alpha: per_axis_speed_bound(dynamics.as_ref(), &setup.grid)?,
            frozen: standard.with_mode(HamMode::Frozen),
            standard,
            target: setup.window.target_field(&setup.model, &setup.grid)?,
            no_obstacle: ScalarField::constant(setup.grid.clone(), NO_OBSTACLE)?,
            value: None,
            stage1: ValueTube::new(setup.grid.clone()),
            stage2: ValueTube::new(setup.grid.clone()),
            obstacle: ValueTube::new(setup.grid.clone()),
            touched: None,
            setup,
        })
    }

    fn active(&self, t: f64) -> bool {
        self.setup.in_sector(t)
    }
}

fn altitude_warnings(setup: &AircraftSetup) -> Vec<String> {
    let z = setup.grid.axis(1);
    let mut out = Vec::new();
    let mut seen = Vec::new();
    for seg in 0..setup.model.segments() {
        let phase = setup.model.phase(seg);
        if seen.contains(&phase) {
            continue;
        }
        seen.push(phase);
        let prof = setup.model.profiles().get(phase).expect("profile checked at construction");
        let (lo, hi) = prof.altitude_range();
        if z.min < lo || z.max > hi {
            out.push(format!(
                "aircraft {}: grid altitudes [{}, {}] exceed the {} speed table [{lo}, {hi}]; speeds are clamped",
                setup.name,
                z.min,
                z.max,
                match phase {
                    FlightPhase::Climb => "climb",
                    FlightPhase::Cruise => "cruise",
                    FlightPhase::Descent => "descent",
                }
            ));
        }
    }
    out
}

fn sweep(
    aircraft: &[AircraftSetup],
    intruders: &[Intruder],
    opts: &SweepOptions,
    times: &[f64],
) -> Result<ReachAvoidResult> {
    if opts.record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be at least 1".into()));
    }
    if times.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("schedule times must strictly decrease".into()));
    }
    let mut tracks = aircraft
        .iter()
        .map(|a| {
            a.validate()?;
            Track::new(a, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    for a in aircraft {
        let covered = |t: f64| times.iter().any(|&s| s == t);
        if !(covered(a.window.t_hi) && covered(a.window.t_lo) && covered(a.entry_time)) {
            return Err(Error::InvalidArgument(format!(
                "schedule does not land on the window and entry times of aircraft {}",
                a.name
            )));
        }
    }
    let mut warnings: Vec<String> = aircraft.iter().flat_map(altitude_warnings).collect();
    let mut conflicts = Vec::new();
    let sep = opts.separation;

    for (k, &t) in times.iter().enumerate() {
        // Advance every aircraft that was already running, start new ones.
        for tr in tracks.iter_mut() {
            if !tr.active(t) {
                continue;
            }
            let next = match tr.value.take() {
                None => tr.target.clone(),
                Some(v) => {
                    let dt = times[k - 1] - t;
                    let spec = if t >= tr.setup.window.t_lo {
                        &tr.frozen
                    } else {
                        &tr.standard
                    };
                    advance(&v, spec, &tr.alpha, dt, opts.scheme)?
                }
            };
            tr.value = Some(next);
        }

        // Conflict detection on the unmasked sets, then masking.
        let live: Vec<usize> = (0..tracks.len()).filter(|&j| tracks[j].active(t)).collect();
        let mut occupancy: Vec<Option<Occupancy>> = (0..tracks.len()).map(|_| None).collect();
        let others = live.len() > 1
            || intruders
                .iter()
                .any(|x| x.tube.times().first().is_some_and(|&hi| hi >= t) && x.tube.times().last().is_some_and(|&lo| lo <= t));
        if others {
            for &i in &live {
                occupancy[i] = Some(Occupancy::new(
                    &tracks[i].setup.model,
                    tracks[i].value.as_ref().unwrap(),
                    &sep,
                ));
            }
        }
        let mut fixed: Vec<(usize, Occupancy)> = Vec::new();
        for (n, x) in intruders.iter().enumerate() {
            if let Ok(f) = x.tube.at_time(t) {
                fixed.push((tracks.len() + n, Occupancy::new(&x.model, &f, &sep)));
            }
        }
        let mut obstacles: Vec<Option<ScalarField>> = (0..tracks.len()).map(|_| None).collect();
        for &j in &live {
            let tr = &tracks[j];
            let vj = tr.value.as_ref().unwrap();
            let mut h: Option<ScalarField> = None;
            let sources = live
                .iter()
                .filter(|&&i| i != j)
                .map(|&i| (i, occupancy[i].as_ref().unwrap()))
                .chain(fixed.iter().map(|(i, o)| (*i, o)));
            for (i, occ) in sources {
                let mask = conflict_mask(&tr.setup.model, vj, occ, &sep);
                let zone = zone_from_mask(&tr.setup.grid, t, j, i, mask);
                if let Some((lower, upper)) = zone.bounds.clone() {
                    conflicts.push(ConflictEvent {
                        time: t,
                        aircraft: j,
                        intruder: i,
                        nodes: zone.count(),
                        lower,
                        upper,
                    });
                    let hji = obstacle_field(&zone, &tr.setup.grid)?;
                    h = Some(match h {
                        None => hji,
                        Some(prev) => field_max(&prev, &hji)?,
                    });
                }
            }
            obstacles[j] = h;
        }

        for &j in &live {
            let tr = &mut tracks[j];
            let h = obstacles[j].take().unwrap_or_else(|| tr.no_obstacle.clone());
            let masked = field_max(tr.value.as_ref().unwrap(), &h)?;
            let w = &tr.setup.window;
            let landing = t == w.t_hi || t == w.t_lo || t == tr.setup.entry_time;
            if landing || k % opts.record_every == 0 {
                if tr.touched.is_none() && boundary_touch(&masked) {
                    tr.touched = Some(t);
                }
                if t >= w.t_lo {
                    tr.stage1.push(t, masked.clone())?;
                }
                if t <= w.t_lo {
                    tr.stage2.push(t, masked.clone())?;
                }
                tr.obstacle.push(t, h)?;
            }
            tr.value = Some(masked);
        }
    }

    for tr in &tracks {
        if let Some(t) = tr.touched {
            warnings.push(format!(
                "aircraft {}: zero level set touches the grid boundary at t = {t}; enlarge the domain",
                tr.setup.name
            ));
        }
    }
    let steps = times.len().saturating_sub(1);
    let results = tracks
        .into_iter()
        .map(|mut tr| {
            tr.stage1.steps = steps;
            tr.stage2.steps = steps;
            AircraftResult {
                name: tr.setup.name.clone(),
                stage1: tr.stage1,
                stage2: tr.stage2,
                obstacle: tr.obstacle,
            }
        })
        .collect();
    Ok(ReachAvoidResult {
        aircraft: results,
        conflicts,
        schedule: times.to_vec(),
        warnings,
    })
}

/// The full multi-aircraft sweep: one backward pass from the latest window
/// close to the earliest entry, with conflict detection and masking after
/// every step.
pub fn run_algorithm1(aircraft: &[AircraftSetup], opts: &SweepOptions) -> Result<ReachAvoidResult> {
    let times = schedule(aircraft, opts)?;
    sweep(aircraft, &[], opts, &times)
}

/// As [`run_algorithm1`] on a given time grid. The grid must land on every
/// window bound and entry time.
pub fn run_algorithm1_on_schedule(
    aircraft: &[AircraftSetup],
    opts: &SweepOptions,
    times: &[f64],
) -> Result<ReachAvoidResult> {
    sweep(aircraft, &[], opts, times)
}

/// Two-stage solve for one aircraft against precomputed intruder tubes,
/// interpolated linearly in time. An intruder only counts at times its
/// tube covers.
pub fn two_stage_tw(
    setup: &AircraftSetup,
    intruders: &[Intruder],
    opts: &SweepOptions,
) -> Result<ReachAvoidResult> {
    let times = schedule(std::slice::from_ref(setup), opts)?;
    sweep(std::slice::from_ref(setup), intruders, opts, &times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ProfileSet, MAX_PATH_ANGLE};

    fn model(waypoints: Vec<[f64; 3]>) -> Arc<AircraftModel> {
        Arc::new(
            AircraftModel::new(
                waypoints,
                ProfileSet::parse("cruise 0 200\ncruise 12000 240").unwrap(),
                MAX_PATH_ANGLE,
                0.1,
                [12.0, 12.0, 0.0],
            )
            .unwrap(),
        )
    }

    fn setup(t_lo: f64, t_hi: f64) -> AircraftSetup {
        let m = model(vec![[0.0, 0.0, 10_000.0], [30_000.0, 0.0, 10_000.0]]);
        AircraftSetup {
            name: "a".into(),
            grid: Arc::new(Grid::uniform(&[(-5_000.0, 40_000.0, 91), (9_000.0, 11_000.0, 21)]).unwrap()),
            window: TargetWindow {
                kind: WindowKind::Adjacent,
                waypoint: 1,
                lower: -300.0,
                upper: 300.0,
                t_lo,
                t_hi,
            },
            entry_time: 0.0,
            model: m,
        }
    }

    #[test]
    fn window_region_has_half_cell_band() {
        let s = setup(60.0, 90.0);
        let (lo, hi) = s.window.region(&s.model, &s.grid);
        assert_eq!(lo, vec![30_000.0 - 250.0, 9_700.0]);
        assert_eq!(hi, vec![30_000.0 + 250.0, 10_300.0]);
        let l = s.window.target_field(&s.model, &s.grid).unwrap();
        let node = s.grid.index(&[70, 10]);
        assert_eq!(s.grid.point_vec(node), vec![30_000.0, 10_000.0]);
        assert!(l.values()[node] < 0.0);
    }

    #[test]
    fn stage1_grows_target_and_hands_off() {
        let s = setup(60.0, 90.0);
        let r = run_algorithm1(&[s.clone()], &SweepOptions::default()).unwrap();
        let a = &r.aircraft[0];
        let l = s.window.target_field(&s.model, &s.grid).unwrap();
        let (t, at_lo) = a.stage1.last().unwrap();
        assert_eq!(t, 60.0);
        let inside_target = sublevel_mask(&l, 0.0);
        let grown = sublevel_mask(at_lo, 0.0);
        assert!(inside_target.iter().zip(&grown).all(|(a, b)| !*a || *b));
        assert!(grown.iter().filter(|m| **m).count() > inside_target.iter().filter(|m| **m).count());
        assert_eq!(a.stage2.fields()[0], *at_lo);
        assert_eq!(a.stage2.last().unwrap().0, 0.0);
        assert!(r.conflicts.is_empty());
    }

    #[test]
    fn zero_length_window_is_one_masking() {
        let s = setup(90.0, 90.0);
        let r = run_algorithm1(&[s.clone()], &SweepOptions::default()).unwrap();
        let a = &r.aircraft[0];
        assert_eq!(a.stage1.len(), 1);
        let l = s.window.target_field(&s.model, &s.grid).unwrap();
        assert_eq!(a.stage1.fields()[0], l);
    }

    #[test]
    fn window_before_entry_is_rejected() {
        let mut s = setup(60.0, 90.0);
        s.entry_time = 70.0;
        assert!(run_algorithm1(&[s], &SweepOptions::default()).is_err());
        let s = setup(60.0, 90.0);
        let opts = SweepOptions {
            horizon: Some((0.0, 80.0)),
            ..SweepOptions::default()
        };
        assert!(matches!(run_algorithm1(&[s], &opts), Err(Error::Config(_))));
    }

    #[test]
    fn blocking_intruder_empties_stage2() {
        let s = setup(60.0, 90.0);
        // An intruder parked on top of the whole approach, at every time.
        let parked = model(vec![[-10_000.0, 0.0, 10_000.0], [45_000.0, 0.0, 10_000.0]]);
        let g = Arc::new(Grid::uniform(&[(-10_000.0, 45_000.0, 12), (9_000.0, 11_000.0, 5)]).unwrap());
        let mut tube = ValueTube::new(g.clone());
        tube.push(90.0, ScalarField::constant(g.clone(), -1.0).unwrap()).unwrap();
        tube.push(0.0, ScalarField::constant(g, -1.0).unwrap()).unwrap();
        let r = two_stage_tw(&s, &[Intruder { model: parked, tube }], &SweepOptions::default()).unwrap();
        let a = &r.aircraft[0];
        let (_, v0) = a.stage2.last().unwrap();
        assert!(sublevel_mask(v0, 0.0).iter().all(|m| !m));
        assert!(!r.conflicts.is_empty());
    }
}
