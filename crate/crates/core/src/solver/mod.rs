//! Backward time integration of the reach-avoid variational inequalities.
//!
//! Terminal mode solves `max(h - V, V_t + H) = 0` and anytime mode solves
//! the same inequality with the freezing Hamiltonian `min(0, H)`. Each step
//! advances the Hamilton-Jacobi equation explicitly and then masks with the
//! obstacle, `V <- max(V, h)`.
//!
//! Stepping backward in time, `V(t - dt) = V(t) + dt * R(V)` with
//! `R = H(p_avg) + sum_i alpha_i (D+_i - D-_i) / 2`. The dissipation enters
//! with a plus sign because time runs backward; it is the Lax-Friedrichs
//! scheme applied to the time-reversed equation. In anytime mode the
//! unmasked update is `min(V, G(V))`, where `G` is the standard update, so
//! values never increase from one step to the next.

mod stencil;

use std::sync::Arc;

use rayon::prelude::*;

use crate::dynamics::{per_axis_speed_bound, DynamicsRef};
use crate::error::{Error, Result};
use crate::grid::{field_max, same_grid, Grid, ScalarField};
use crate::hamiltonian::{HamMode, HamiltonianSpec, DEFAULT_INPUT_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Reach the target exactly at the final time.
    Terminal,
    /// Reach the target at any time before the final time.
    Anytime,
}

impl Mode {
    pub fn ham_mode(self) -> HamMode {
        match self {
            Mode::Terminal => HamMode::Standard,
            Mode::Anytime => HamMode::Frozen,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Terminal => "terminal",
            Mode::Anytime => "anytime",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "terminal" => Some(Mode::Terminal),
            "anytime" => Some(Mode::Anytime),
            _ => None,
        }
    }
}

/// Space-time discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// First-order upwind differences, forward Euler. Monotone.
    #[default]
    LaxFriedrichs1,
    /// Second-order ENO differences with two-stage TVD Runge-Kutta.
    Eno2Rk2,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::LaxFriedrichs1 => "lf1",
            Scheme::Eno2Rk2 => "eno2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lf1" => Some(Scheme::LaxFriedrichs1),
            "eno2" => Some(Scheme::Eno2Rk2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub cfl_number: f64,
    pub record_every: usize,
    pub mode: Mode,
    pub scheme: Scheme,
    pub samples_per_axis: usize,
    /// Extra times the integration must land on exactly (always recorded).
    pub stops: Vec<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            cfl_number: 0.5,
            record_every: 1,
            mode: Mode::Terminal,
            scheme: Scheme::default(),
            samples_per_axis: DEFAULT_INPUT_SAMPLES,
            stops: Vec::new(),
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_number > 0.0 && self.cfl_number <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cfl number {} must lie in (0, 1]",
                self.cfl_number
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be at least 1".into()));
        }
        if self.samples_per_axis < 2 {
            return Err(Error::InvalidArgument("samples per input axis must be at least 2".into()));
        }
        Ok(())
    }
}

/// Value fields recorded backward in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTube {
    grid: Arc<Grid>,
    times: Vec<f64>,
    fields: Vec<ScalarField>,
    pub warnings: Vec<String>,
    pub steps: usize,
}

impl ValueTube {
    pub fn new(grid: Arc<Grid>) -> Self {
        Self {
            grid,
            times: Vec::new(),
            fields: Vec::new(),
            warnings: Vec::new(),
            steps: 0,
        }
    }

    /// Appends a frame; times must strictly decrease.
    pub fn push(&mut self, time: f64, field: ScalarField) -> Result<()> {
        if !same_grid(&self.grid, field.grid()) {
            return Err(Error::GridMismatch);
        }
        if let Some(&last) = self.times.last() {
            if !(time < last) {
                return Err(Error::InvalidArgument(format!(
                    "tube times must decrease, got {time} after {last}"
                )));
            }
        }
        self.times.push(time);
        self.fields.push(field);
        Ok(())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn frames(&self) -> impl Iterator<Item = (f64, &ScalarField)> {
        self.times.iter().copied().zip(&self.fields)
    }

    pub fn last(&self) -> Option<(f64, &ScalarField)> {
        self.frames().last()
    }

    /// Frame recorded at exactly `t`.
    pub fn field_at(&self, t: f64) -> Option<&ScalarField> {
        self.times.iter().position(|&s| s == t).map(|i| &self.fields[i])
    }

    /// Field at `t`, linear in time between the bracketing frames.
    pub fn at_time(&self, t: f64) -> Result<ScalarField> {
        let coverage = || Error::TimeCoverage {
            time: t,
            start: self.times.last().copied().unwrap_or(f64::NAN),
            end: self.times.first().copied().unwrap_or(f64::NAN),
        };
        if let Some(f) = self.field_at(t) {
            return Ok(f.clone());
        }
        let i = self.times.iter().position(|&s| s < t).ok_or_else(coverage)?;
        if i == 0 {
            return Err(coverage());
        }
        let (t_hi, t_lo) = (self.times[i - 1], self.times[i]);
        let w = (t - t_lo) / (t_hi - t_lo);
        let (a, b) = (self.fields[i].values(), self.fields[i - 1].values());
        let values = a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect();
        Ok(ScalarField::from_parts(self.grid.clone(), values))
    }

    /// Sub-tube with exactly the requested times.
    pub fn select(&self, times: &[f64]) -> Result<ValueTube> {
        let mut out = ValueTube::new(self.grid.clone());
        for &t in times {
            let f = self.field_at(t).ok_or(Error::TimeMismatch)?;
            out.push(t, f.clone())?;
        }
        Ok(out)
    }
}

/// `cfl * min_i dx_i / alpha_i` over axes with positive `alpha`; infinite
/// when every `alpha` is zero.
pub fn cfl_dt(grid: &Grid, alpha: &[f64], cfl_number: f64) -> f64 {
    let m = (0..grid.dim())
        .filter(|&i| alpha[i] > 0.0)
        .map(|i| grid.spacing(i) / alpha[i])
        .fold(f64::INFINITY, f64::min);
    cfl_number * m
}

fn check_dt(grid: &Grid, alpha: &[f64], dt: f64) -> Result<()> {
    if alpha.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            what: "dissipation coefficients",
            expected: grid.dim(),
            got: alpha.len(),
        });
    }
    if alpha.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(Error::InvalidArgument("dissipation coefficients must be finite and >= 0".into()));
    }
    let limit = cfl_dt(grid, alpha, 1.0);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    Ok(())
}

fn first_non_finite(values: &[f64], context: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(node) => Err(Error::NonFinite {
            node,
            value: values[node],
            context: context.into(),
        }),
    }
}

/// Backward rate `H(p_avg) + sum_i alpha_i (D+_i - D-_i) / 2` at every node.
fn rate(
    values: &[f64],
    grid: &Grid,
    spec: &HamiltonianSpec,
    alpha: &[f64],
    scheme: Scheme,
) -> Result<Vec<f64>> {
    let n = grid.dim();
    let out: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map_init(
            || (spec.workspace(), vec![0.0; n], vec![0.0; n]),
            |(ws, p, x), node| {
                grid.point(node, x);
                let mut diss = 0.0;
                for i in 0..n {
                    let k = grid.axis_index(node, i);
                    let (stride, len, dx) = (grid.stride(i), grid.axis(i).nodes, grid.spacing(i));
                    let (dm, dp) = match scheme {
                        Scheme::LaxFriedrichs1 => stencil::first_order(values, node, stride, k, len, dx),
                        Scheme::Eno2Rk2 => stencil::eno2(values, node, stride, k, len, dx),
                    };
                    p[i] = 0.5 * (dm + dp);
                    diss += alpha[i] * 0.5 * (dp - dm);
                }
                spec.standard(p, x, ws) + diss
            },
        )
        .collect();
    first_non_finite(&out, "Hamiltonian evaluation")?;
    Ok(out)
}

/// One unmasked backward step honoring the configured mode: the standard
/// update `G(V)` or, for the frozen mode, `min(V, G(V))`.
pub fn advance(
    v_next: &ScalarField,
    spec: &HamiltonianSpec,
    alpha: &[f64],
    dt: f64,
    scheme: Scheme,
) -> Result<ScalarField> {
    let grid = v_next.grid();
    if grid.dim() != spec.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "grid dimension",
            expected: spec.state_dim(),
            got: grid.dim(),
        });
    }
    check_dt(grid, alpha, dt)?;
    let v = v_next.values();
    let r = rate(v, grid, spec, alpha, scheme)?;
    let mut g: Vec<f64> = match scheme {
        Scheme::LaxFriedrichs1 => v.iter().zip(&r).map(|(a, b)| a + dt * b).collect(),
        Scheme::Eno2Rk2 => {
            let v1: Vec<f64> = v.iter().zip(&r).map(|(a, b)| a + dt * b).collect();
            let r1 = rate(&v1, grid, spec, alpha, scheme)?;
            v.iter()
                .zip(v1.iter().zip(&r1))
                .map(|(a, (b, c))| 0.5 * (a + b + dt * c))
                .collect()
        }
    };
    if spec.mode() == HamMode::Frozen {
        for (gi, vi) in g.iter_mut().zip(v) {
            *gi = gi.min(*vi);
        }
    }
    first_non_finite(&g, "value update")?;
    Ok(ScalarField::from_parts(grid.clone(), g))
}

/// One first-order backward step followed by obstacle masking.
pub fn step_backward(
    v_next: &ScalarField,
    h: &ScalarField,
    spec: &HamiltonianSpec,
    alpha: &[f64],
    dt: f64,
) -> Result<ScalarField> {
    step_backward_with(v_next, h, spec, alpha, dt, Scheme::LaxFriedrichs1)
}

pub fn step_backward_with(
    v_next: &ScalarField,
    h: &ScalarField,
    spec: &HamiltonianSpec,
    alpha: &[f64],
    dt: f64,
    scheme: Scheme,
) -> Result<ScalarField> {
    if !same_grid(v_next.grid(), h.grid()) {
        return Err(Error::GridMismatch);
    }
    check_dt(v_next.grid(), alpha, dt)?;
    field_max(&advance(v_next, spec, alpha, dt, scheme)?, h)
}

/// Splits `[t_to, t_from]` into equal steps no longer than `dt_max`.
pub fn uniform_steps(t_from: f64, t_to: f64, dt_max: f64) -> (usize, f64) {
    let span = t_from - t_to;
    if span <= 0.0 {
        return (0, 0.0);
    }
    let n = if dt_max.is_finite() {
        ((span / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    } else {
        1
    };
    (n, span / n as f64)
}

/// Time `k` steps of size `dt` below `t_from`, landing exactly on `t_to`
/// at the last step.
pub fn step_time(t_from: f64, t_to: f64, k: usize, n: usize, dt: f64) -> f64 {
    if k == n {
        t_to
    } else {
        t_from - k as f64 * dt
    }
}

/// Ordered landing times strictly inside `(t0, t_final)` followed by `t0`.
pub fn landing_times(stops: &[f64], t_final: f64, t0: f64) -> Vec<f64> {
    let mut s: Vec<f64> = stops
        .iter()
        .copied()
        .filter(|&t| t > t0 && t < t_final)
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.dedup();
    s.push(t0);
    s
}

pub(crate) fn boundary_touch(field: &ScalarField) -> bool {
    let g = field.grid();
    field
        .values()
        .iter()
        .enumerate()
        .any(|(node, &v)| v <= 0.0 && g.is_boundary(node))
}

/// Integrates from `V(T) = max(l, h)` back to `t0`.
pub fn solve(
    dynamics: DynamicsRef,
    l: &ScalarField,
    h: &ScalarField,
    t_final: f64,
    t0: f64,
    opts: &SolveOptions,
) -> Result<ValueTube> {
    opts.validate()?;
    if !(t0.is_finite() && t_final.is_finite()) || t0 > t_final {
        return Err(Error::InvalidArgument(format!(
            "horizon requires t0 <= T, got t0 = {t0}, T = {t_final}"
        )));
    }
    if !same_grid(l.grid(), h.grid()) {
        return Err(Error::GridMismatch);
    }
    let grid = l.grid().clone();
    let spec = HamiltonianSpec::new(dynamics.clone(), opts.samples_per_axis, opts.mode.ham_mode())?;
    if grid.dim() != spec.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "grid dimension",
            expected: spec.state_dim(),
            got: grid.dim(),
        });
    }
    let alpha = per_axis_speed_bound(dynamics.as_ref(), &grid)?;
    let dt_max = cfl_dt(&grid, &alpha, opts.cfl_number);

    let mut tube = ValueTube::new(grid.clone());
    let mut v = field_max(l, h)?;
    let mut touched = boundary_touch(&v).then_some(t_final);
    tube.push(t_final, v.clone())?;

    let mut t = t_final;
    let mut steps = 0usize;
    for stop in landing_times(&opts.stops, t_final, t0) {
        let (n, dt) = uniform_steps(t, stop, dt_max);
        let t_from = t;
        for k in 1..=n {
            v = step_backward_with(&v, h, &spec, &alpha, dt, opts.scheme)?;
            t = step_time(t_from, stop, k, n, dt);
            steps += 1;
            if k == n || steps % opts.record_every == 0 {
                if touched.is_none() && boundary_touch(&v) {
                    touched = Some(t);
                }
                tube.push(t, v.clone())?;
            }
        }
    }
    tube.steps = steps;
    if let Some(t) = touched {
        tube.warnings.push(format!(
            "zero level set touches the grid boundary at t = {t}; enlarge the domain"
        ));
    }
    Ok(tube)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{AffineSystem, InputBox, Polynomial, SingleIntegrator};

    fn line(n: usize) -> Arc<Grid> {
        Arc::new(Grid::uniform(&[(-2.0, 2.0, n)]).unwrap())
    }

    fn reach_1d(grid: &Arc<Grid>) -> (DynamicsRef, ScalarField, ScalarField) {
        let d: DynamicsRef = Arc::new(SingleIntegrator::new(1.0, 0.0).unwrap());
        let l = ScalarField::from_fn(grid.clone(), |x| x[0].abs() - 0.5).unwrap();
        let h = ScalarField::constant(grid.clone(), -1e6).unwrap();
        (d, l, h)
    }

    #[test]
    fn cfl_examples() {
        let g = Grid::uniform(&[(0.0, 1.0, 101)]).unwrap();
        assert!((cfl_dt(&g, &[2.0], 0.5) - 0.0025).abs() < 1e-15);
        assert_eq!(cfl_dt(&g, &[0.0], 0.5), f64::INFINITY);
        let g2 = Grid::uniform(&[(0.0, 1.0, 11), (0.0, 1.0, 11)]).unwrap();
        assert!((cfl_dt(&g2, &[1.0, 10.0], 1.0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn zero_dynamics_leave_value_unchanged() {
        let g = line(41);
        let d: DynamicsRef = Arc::new(
            AffineSystem::new(
                vec![Polynomial::constant(0.0)],
                vec![vec![Polynomial::constant(0.0)]],
                vec![vec![]],
                InputBox::symmetric(&[1.0]).unwrap(),
                InputBox::empty(),
            )
            .unwrap(),
        );
        let spec = HamiltonianSpec::new(d, 3, HamMode::Standard).unwrap();
        let v = ScalarField::from_fn(g.clone(), |x| x[0] * x[0] - 1.0).unwrap();
        let h = ScalarField::constant(g, -1e6).unwrap();
        let out = step_backward(&v, &h, &spec, &[0.0], 0.1).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn dominant_obstacle_wins_exactly() {
        let g = line(41);
        let (d, l, _) = reach_1d(&g);
        let spec = HamiltonianSpec::new(d, 3, HamMode::Standard).unwrap();
        let h = ScalarField::constant(g, 10.0).unwrap();
        let out = step_backward(&l, &h, &spec, &[1.05], 0.05).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn target_grows_at_unit_speed_at_smooth_node() {
        let g = line(41);
        let (d, l, h) = reach_1d(&g);
        let spec = HamiltonianSpec::new(d, 3, HamMode::Standard).unwrap();
        let dt = 0.05;
        let out = step_backward(&l, &h, &spec, &[1.05], dt).unwrap();
        let node = g.index(&[30]);
        assert_eq!(g.point_vec(node), vec![1.0]);
        assert!((out.values()[node] - (0.5 - dt)).abs() < 1e-14);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = line(41);
        let (d, l, h) = reach_1d(&g);
        let spec = HamiltonianSpec::new(d, 3, HamMode::Standard).unwrap();
        assert!(matches!(
            step_backward(&l, &h, &spec, &[1.0], 0.2),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn empty_horizon_returns_terminal_condition() {
        let g = line(21);
        let (d, l, h) = reach_1d(&g);
        let tube = solve(d, &l, &h, 1.0, 1.0, &SolveOptions::default()).unwrap();
        assert_eq!(tube.len(), 1);
        assert_eq!(tube.fields()[0], field_max(&l, &h).unwrap());
    }

    #[test]
    fn reversed_horizon_is_rejected() {
        let g = line(21);
        let (d, l, h) = reach_1d(&g);
        let err = solve(d, &l, &h, 0.0, 1.0, &SolveOptions::default()).unwrap_err();
        assert!(err.to_string().contains("horizon"));
    }

    #[test]
    fn lands_exactly_on_stops_and_t0() {
        let g = line(41);
        let (d, l, h) = reach_1d(&g);
        let opts = SolveOptions {
            record_every: 1000,
            stops: vec![0.37],
            ..SolveOptions::default()
        };
        let tube = solve(d, &l, &h, 1.0, 0.0, &opts).unwrap();
        assert_eq!(tube.times(), &[1.0, 0.37, 0.0]);
    }

    #[test]
    fn analytic_reach_first_order() {
        let g = line(401);
        let (d, l, h) = reach_1d(&g);
        let tube = solve(d, &l, &h, 1.0, 0.0, &SolveOptions::default()).unwrap();
        let (t, v) = tube.last().unwrap();
        assert_eq!(t, 0.0);
        let err = g_err(&g, v, 1.0);
        assert!(err < 0.06, "{err}");
    }

    fn g_err(g: &Grid, v: &ScalarField, tau: f64) -> f64 {
        (0..g.len())
            .map(|k| {
                let x = g.point_vec(k)[0];
                let exact = (x.abs() - tau).max(0.0) - 0.5;
                (v.values()[k] - exact).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn anytime_matches_reach_and_lies_below_terminal() {
        let g = line(201);
        let (d, l, h) = reach_1d(&g);
        let std = solve(d.clone(), &l, &h, 1.0, 0.0, &SolveOptions::default()).unwrap();
        let any = solve(
            d,
            &l,
            &h,
            1.0,
            0.0,
            &SolveOptions {
                mode: Mode::Anytime,
                ..SolveOptions::default()
            },
        )
        .unwrap();
        for (a, b) in any.fields().iter().zip(std.fields()) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!(*x <= *y + 1e-12);
            }
        }
        assert!(g_err(&g, any.last().unwrap().1, 1.0) < 0.1);
    }

    #[test]
    fn interpolates_between_frames() {
        let g = line(5);
        let mut tube = ValueTube::new(g.clone());
        tube.push(1.0, ScalarField::constant(g.clone(), 2.0).unwrap()).unwrap();
        tube.push(0.0, ScalarField::constant(g.clone(), 4.0).unwrap()).unwrap();
        assert_eq!(tube.at_time(0.25).unwrap().values()[0], 3.5);
        assert!(matches!(tube.at_time(1.5), Err(Error::TimeCoverage { .. })));
        assert!(tube.push(0.5, ScalarField::constant(g, 0.0).unwrap()).is_err());
    }

    #[test]
    fn warns_when_set_reaches_boundary() {
        let g = Arc::new(Grid::uniform(&[(-1.0, 1.0, 41)]).unwrap());
        let (d, l, h) = reach_1d(&g);
        let tube = solve(d, &l, &h, 1.0, 0.0, &SolveOptions::default()).unwrap();
        assert_eq!(tube.warnings.len(), 1);
    }
}
