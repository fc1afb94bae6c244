//! Along-track aircraft model.
//!
//! Each aircraft follows a flight plan of straight segments between
//! waypoints, tracking the plan laterally. The continuous state on segment
//! `i` is `(s, z, t)`: horizontal distance covered on the segment, altitude
//! and time. Airspeed comes from a speed-altitude table chosen by the flight
//! phase of the segment and may vary by `speed_fraction` through the control
//! `b` in `[-1, 1]`. Wind is a bounded disturbance. The path angle uses the
//! small-angle forms `sin g = g`, `cos g = 1`.
//!
//! For grid solves the segments are unrolled into one along-track
//! coordinate `sigma` (cumulative horizontal distance from the first
//! waypoint), so the segment guard `s > d_i` with reset `s = 0` becomes a
//! change of segment at the waypoint offsets. See [`AircraftDynamics`].

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use super::{Dynamics, InputBox, InputCoupling};
use crate::error::{Error, Result};

/// Upper limit on the path-angle bound: 5 degrees.
pub const MAX_PATH_ANGLE: f64 = 5.0 * std::f64::consts::PI / 180.0;

/// Airspeed may deviate from the nominal profile by this fraction.
pub const DEFAULT_SPEED_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlightPhase {
    Climb,
    Cruise,
    Descent,
}

impl FlightPhase {
    pub fn name(self) -> &'static str {
        match self {
            FlightPhase::Climb => "climb",
            FlightPhase::Cruise => "cruise",
            FlightPhase::Descent => "descent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "climb" => Some(FlightPhase::Climb),
            "cruise" => Some(FlightPhase::Cruise),
            "descent" => Some(FlightPhase::Descent),
            _ => None,
        }
    }

    /// Phase implied by a segment's path angle.
    pub fn from_path_angle(angle: f64) -> Self {
        if angle > 0.0 {
            FlightPhase::Climb
        } else if angle < 0.0 {
            FlightPhase::Descent
        } else {
            FlightPhase::Cruise
        }
    }
}

impl fmt::Display for FlightPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Result of a table lookup; `clamped` is set when the altitude fell
/// outside the table and the nearest knot was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedLookup {
    pub speed: f64,
    pub clamped: bool,
}

/// Piecewise-linear nominal airspeed as a function of altitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    phase: FlightPhase,
    knots: Vec<(f64, f64)>,
}

impl SpeedProfile {
    pub fn new(phase: FlightPhase, knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidArgument(format!("{phase} profile has no knots")));
        }
        for w in knots.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::InvalidArgument(format!(
                    "{phase} profile altitudes must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(k) = knots.iter().find(|k| !(k.1 > 0.0 && k.0.is_finite() && k.1.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "{phase} profile has a non-positive airspeed {} at {} m",
                k.1, k.0
            )));
        }
        Ok(Self { phase, knots })
    }

    pub fn phase(&self) -> FlightPhase {
        self.phase
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn altitude_range(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    pub fn max_speed(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(0.0, f64::max)
    }

    pub fn lookup(&self, z: f64) -> SpeedLookup {
        let k = &self.knots;
        let last = k.len() - 1;
        if z < k[0].0 {
            return SpeedLookup {
                speed: k[0].1,
                clamped: true,
            };
        }
        if z > k[last].0 {
            return SpeedLookup {
                speed: k[last].1,
                clamped: true,
            };
        }
        let i = k.partition_point(|p| p.0 <= z);
        // k[i-1].0 <= z, and i <= last unless z is the top knot.
        let speed = if i > last {
            k[last].1
        } else {
            let (a0, s0) = k[i - 1];
            let (a1, s1) = k[i];
            if z == a0 {
                s0
            } else {
                s0 + (s1 - s0) * (z - a0) / (a1 - a0)
            }
        };
        SpeedLookup {
            speed,
            clamped: false,
        }
    }

    pub fn speed_at(&self, z: f64) -> f64 {
        self.lookup(z).speed
    }
}

/// Speed profiles for the three flight phases. A phase may be missing if
/// no segment uses it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProfileSet {
    pub climb: Option<SpeedProfile>,
    pub cruise: Option<SpeedProfile>,
    pub descent: Option<SpeedProfile>,
}

impl ProfileSet {
    pub fn get(&self, phase: FlightPhase) -> Option<&SpeedProfile> {
        match phase {
            FlightPhase::Climb => self.climb.as_ref(),
            FlightPhase::Cruise => self.cruise.as_ref(),
            FlightPhase::Descent => self.descent.as_ref(),
        }
    }

    /// Parses lines of `phase altitude_m airspeed_mps`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<(FlightPhase, f64, f64)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let bad = || {
                Error::InvalidArgument(format!(
                    "speed table line {}: expected `phase altitude_m airspeed_mps`, got {raw:?}",
                    n + 1
                ))
            };
            if cols.len() != 3 {
                return Err(bad());
            }
            let phase = FlightPhase::parse(cols[0]).ok_or_else(bad)?;
            let alt: f64 = cols[1].parse().map_err(|_| bad())?;
            let spd: f64 = cols[2].parse().map_err(|_| bad())?;
            rows.push((phase, alt, spd));
        }
        let collect = |phase| -> Result<Option<SpeedProfile>> {
            let mut knots: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.0 == phase)
                .map(|r| (r.1, r.2))
                .collect();
            if knots.is_empty() {
                return Ok(None);
            }
            knots.sort_by(|a, b| a.0.total_cmp(&b.0));
            SpeedProfile::new(phase, knots).map(Some)
        };
        let set = Self {
            climb: collect(FlightPhase::Climb)?,
            cruise: collect(FlightPhase::Cruise)?,
            descent: collect(FlightPhase::Descent)?,
        };
        if set.climb.is_none() && set.cruise.is_none() && set.descent.is_none() {
            return Err(Error::InvalidArgument("speed table is empty".into()));
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read speed table {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }
}

/// A flight plan with its derived segment geometry and performance data.
#[derive(Debug, Clone, PartialEq)]
pub struct AircraftModel {
    waypoints: Vec<[f64; 3]>,
    headings: Vec<f64>,
    path_angles: Vec<f64>,
    lengths: Vec<f64>,
    offsets: Vec<f64>,
    profiles: ProfileSet,
    gamma_max: f64,
    speed_fraction: f64,
    wind_bound: [f64; 3],
}

impl AircraftModel {
    pub fn new(
        waypoints: Vec<[f64; 3]>,
        profiles: ProfileSet,
        gamma_max: f64,
        speed_fraction: f64,
        wind_bound: [f64; 3],
    ) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidArgument(
                "a flight plan needs at least two waypoints".into(),
            ));
        }
        if !(gamma_max > 0.0 && gamma_max <= MAX_PATH_ANGLE + 1e-15) {
            return Err(Error::InvalidArgument(format!(
                "path-angle bound {gamma_max} rad must lie in (0, 5 deg]"
            )));
        }
        if !(0.0..1.0).contains(&speed_fraction) {
            return Err(Error::InvalidArgument(format!(
                "speed fraction {speed_fraction} must lie in [0, 1)"
            )));
        }
        if wind_bound.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument("wind bounds must be finite and >= 0".into()));
        }
        let mut headings = Vec::new();
        let mut path_angles = Vec::new();
        let mut lengths = Vec::new();
        let mut offsets = vec![0.0];
        for (i, w) in waypoints.windows(2).enumerate() {
            let (dx, dy, dz) = (w[1][0] - w[0][0], w[1][1] - w[0][1], w[1][2] - w[0][2]);
            let d = dx.hypot(dy);
            if !(d > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "segment {i} has zero horizontal length"
                )));
            }
            headings.push(dy.atan2(dx));
            path_angles.push((dz / d).atan());
            lengths.push(d);
            offsets.push(offsets[i] + d);
        }
        let model = Self {
            waypoints,
            headings,
            path_angles,
            lengths,
            offsets,
            profiles,
            gamma_max,
            speed_fraction,
            wind_bound,
        };
        for i in 0..model.segments() {
            let phase = model.phase(i);
            if model.profiles.get(phase).is_none() {
                return Err(Error::InvalidArgument(format!(
                    "segment {i} is a {phase} segment but the speed table has no {phase} profile"
                )));
            }
        }
        Ok(model)
    }

    pub fn segments(&self) -> usize {
        self.lengths.len()
    }

    pub fn waypoints(&self) -> &[[f64; 3]] {
        &self.waypoints
    }

    pub fn heading(&self, segment: usize) -> f64 {
        self.headings[segment]
    }

    pub fn path_angle(&self, segment: usize) -> f64 {
        self.path_angles[segment]
    }

    pub fn length(&self, segment: usize) -> f64 {
        self.lengths[segment]
    }

    /// Along-track offset of waypoint `k` from the first waypoint.
    pub fn waypoint_offset(&self, k: usize) -> f64 {
        self.offsets[k]
    }

    pub fn total_length(&self) -> f64 {
        self.offsets[self.offsets.len() - 1]
    }

    pub fn profiles(&self) -> &ProfileSet {
        &self.profiles
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }

    pub fn speed_fraction(&self) -> f64 {
        self.speed_fraction
    }

    pub fn wind_bound(&self) -> [f64; 3] {
        self.wind_bound
    }

    pub fn phase(&self, segment: usize) -> FlightPhase {
        FlightPhase::from_path_angle(self.path_angles[segment])
    }

    /// Nominal airspeed `g(z)` on a segment.
    pub fn nominal_speed(&self, segment: usize, z: f64) -> f64 {
        self.profile(segment).speed_at(z)
    }

    fn profile(&self, segment: usize) -> &SpeedProfile {
        // Presence checked in `new`.
        self.profiles.get(self.phase(segment)).unwrap()
    }

    /// Admissible path-angle interval on a segment.
    pub fn path_angle_range(&self, segment: usize) -> (f64, f64) {
        match self.phase(segment) {
            FlightPhase::Climb => (0.0, self.gamma_max),
            FlightPhase::Cruise => (0.0, 0.0),
            FlightPhase::Descent => (-self.gamma_max, 0.0),
        }
    }

    fn check_segment(&self, segment: usize) -> Result<()> {
        if segment >= self.segments() {
            return Err(Error::SegmentOutOfRange {
                segment,
                count: self.segments(),
            });
        }
        Ok(())
    }

    /// 3D position of along-segment coordinate `s` at altitude `z`.
    pub fn map_to_3d(&self, segment: usize, s: f64, z: f64) -> Result<[f64; 3]> {
        self.check_segment(segment)?;
        let d = self.lengths[segment];
        if !(0.0..=d).contains(&s) {
            return Err(Error::OutsideSegment {
                segment,
                s,
                length: d,
            });
        }
        Ok(self.place(segment, s, z))
    }

    fn place(&self, segment: usize, s: f64, z: f64) -> [f64; 3] {
        let w = self.waypoints[segment];
        let psi = self.headings[segment];
        [w[0] + psi.cos() * s, w[1] + psi.sin() * s, z]
    }

    /// Segment and along-segment coordinate of the unrolled coordinate
    /// `sigma`. A waypoint offset belongs to the segment that ends there.
    /// Positions before the plan or past its end extend the first or last
    /// segment, so `s` may be negative or exceed the segment length.
    pub fn locate(&self, sigma: f64) -> (usize, f64) {
        let last = self.segments() - 1;
        let i = self.offsets[1..last + 1]
            .partition_point(|&end| end < sigma)
            .min(last);
        (i, sigma - self.offsets[i])
    }

    /// 3D position of an unrolled along-track coordinate, extrapolating the
    /// end segments beyond the plan.
    pub fn position_along(&self, sigma: f64, z: f64) -> [f64; 3] {
        let (i, s) = self.locate(sigma);
        self.place(i, s, z)
    }

    /// Unclamped flow on a segment; inputs are taken as given.
    fn raw_flow(&self, segment: usize, z: f64, b: f64, gamma: f64, wind: &[f64]) -> [f64; 2] {
        let airspeed = (1.0 + self.speed_fraction * b) * self.nominal_speed(segment, z);
        let psi = self.headings[segment];
        [
            airspeed + wind[0] * psi.cos() + wind[1] * psi.sin(),
            airspeed * gamma + wind[2],
        ]
    }
}

/// Continuous flow `(s', z', t')` on a segment.
pub fn aircraft_flow(
    model: &AircraftModel,
    segment: usize,
    state: [f64; 3],
    input: [f64; 2],
    wind: [f64; 3],
) -> Result<[f64; 3]> {
    model.check_segment(segment)?;
    let [b, gamma] = input;
    if !(-1.0..=1.0).contains(&b) {
        return Err(Error::OutsideBox {
            what: "speed control",
            index: 0,
            value: b,
            lower: -1.0,
            upper: 1.0,
        });
    }
    if gamma.abs() > model.gamma_max {
        return Err(Error::OutsideBox {
            what: "path angle",
            index: 1,
            value: gamma,
            lower: -model.gamma_max,
            upper: model.gamma_max,
        });
    }
    for (i, (&w, &bound)) in wind.iter().zip(&model.wind_bound).enumerate() {
        if w.abs() > bound {
            return Err(Error::OutsideBox {
                what: "wind",
                index: i,
                value: w,
                lower: -bound,
                upper: bound,
            });
        }
    }
    let [ds, dz] = model.raw_flow(segment, state[1], b, gamma, &wind);
    Ok([ds, dz, 1.0])
}

/// Outcome of checking the segment guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transition {
    /// Still inside the segment's domain `s <= d`.
    Stay,
    /// Guard fired: continue on `segment` with the reset coordinate `s`.
    Next { segment: usize, s: f64 },
    /// Guard fired on the last segment; the plan has ended.
    Terminal,
}

/// Guard `s > d_segment` with reset `s = 0`; altitude and time are kept.
pub fn segment_transition(model: &AircraftModel, segment: usize, s: f64) -> Transition {
    if segment >= model.segments() {
        return Transition::Terminal;
    }
    if s <= model.lengths[segment] {
        Transition::Stay
    } else if segment + 1 < model.segments() {
        Transition::Next {
            segment: segment + 1,
            s: 0.0,
        }
    } else {
        Transition::Terminal
    }
}

/// Grid dynamics of one aircraft over `(sigma, z)`.
///
/// Control `u = (b, g)` with `b` in `[-1, 1]` and `g` in `[-gmax, gmax]`;
/// on each segment `g` is mapped affinely onto the phase's admissible
/// path-angle interval (`[0, gmax]` climbing, `[-gmax, 0]` descending, `0`
/// cruising). Disturbance `v = (w_x, w_y, w_z)` within the wind bounds.
#[derive(Debug, Clone)]
pub struct AircraftDynamics {
    model: Arc<AircraftModel>,
    control: InputBox,
    disturbance: InputBox,
}

impl AircraftDynamics {
    pub fn new(model: Arc<AircraftModel>) -> Self {
        let g = model.gamma_max;
        let control = InputBox::new(vec![-1.0, -g], vec![1.0, g]).unwrap();
        let disturbance = InputBox::symmetric(&model.wind_bound).unwrap();
        Self {
            model,
            control,
            disturbance,
        }
    }

    pub fn model(&self) -> &Arc<AircraftModel> {
        &self.model
    }

    /// Physical path angle realized by control value `g` on a segment.
    pub fn effective_path_angle(&self, segment: usize, g: f64) -> f64 {
        let gmax = self.model.gamma_max;
        match self.model.phase(segment) {
            FlightPhase::Climb => 0.5 * (g + gmax),
            FlightPhase::Cruise => 0.0,
            FlightPhase::Descent => 0.5 * (g - gmax),
        }
    }
}

impl Dynamics for AircraftDynamics {
    fn state_dim(&self) -> usize {
        2
    }
    fn control(&self) -> &InputBox {
        &self.control
    }
    fn disturbance(&self) -> &InputBox {
        &self.disturbance
    }
    fn eval(&self, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) {
        let (segment, _) = self.model.locate(x[0]);
        let gamma = self.effective_path_angle(segment, u[1]);
        let f = self.model.raw_flow(segment, x[1], u[0], gamma, v);
        out[0] = f[0];
        out[1] = f[1];
    }
    fn coupling(&self) -> InputCoupling {
        InputCoupling::Separable
    }
}
