//! Brute-force dynamic programming on the grid.
//!
//! One step of length `dt` follows the flow from every node for each
//! sampled input pair and looks the successor value up by multilinear
//! interpolation:
//!
//! ```text
//! V_k(x) = max(h(x), max_v min_u V_{k+1}(x + dt f(x, u, v)))
//! ```
//!
//! The anytime variant adds the option to freeze in place, so the game
//! term is replaced by `min(V_{k+1}(x), game term)`. Used as ground truth
//! for the PDE solver on coarse grids.

use std::sync::Arc;

use rayon::prelude::*;

use crate::dynamics::DynamicsRef;
use crate::error::{Error, Result};
use crate::grid::{field_max, same_grid, Grid, ScalarField};
use crate::solver::{Mode, ValueTube};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub dt: f64,
    pub control_samples: usize,
    pub disturbance_samples: usize,
    pub mode: Mode,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            dt: 0.05,
            control_samples: 3,
            disturbance_samples: 3,
            mode: Mode::Terminal,
        }
    }
}

/// Number of steps of length `dt` in `span`, if it divides evenly.
fn step_count(span: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("oracle dt must be positive, got {dt}")));
    }
    let n = (span / dt).round();
    if (n * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "oracle dt {dt} does not divide the horizon {span}"
        )));
    }
    Ok(n as usize)
}

fn far_outside(grid: &Grid, y: &[f64]) -> bool {
    grid.axes()
        .iter()
        .zip(y)
        .any(|(a, &c)| c < a.min - a.spacing() || c > a.max + a.spacing())
}

/// Runs the recursion from `V(T) = max(l, h)` back to `t0`, recording
/// every step. Lookups landing more than one cell outside the grid are
/// clamped and counted in a warning.
pub fn dp_solve(
    dynamics: DynamicsRef,
    l: &ScalarField,
    h: &ScalarField,
    t_final: f64,
    t0: f64,
    opts: &OracleOptions,
) -> Result<ValueTube> {
    if !(t0 <= t_final) {
        return Err(Error::InvalidArgument(format!(
            "horizon requires t0 <= T, got t0 = {t0}, T = {t_final}"
        )));
    }
    if !same_grid(l.grid(), h.grid()) {
        return Err(Error::GridMismatch);
    }
    if opts.control_samples < 2 || opts.disturbance_samples < 2 {
        return Err(Error::InvalidArgument("oracle needs at least 2 samples per input axis".into()));
    }
    let grid: Arc<Grid> = l.grid().clone();
    let n = dynamics.state_dim();
    if grid.dim() != n {
        return Err(Error::DimensionMismatch {
            what: "grid dimension",
            expected: n,
            got: grid.dim(),
        });
    }
    let span = t_final - t0;
    let steps = if span == 0.0 { 0 } else { step_count(span, opts.dt)? };
    let dt = if steps == 0 { 0.0 } else { span / steps as f64 };

    let (m, q) = (dynamics.control().dim(), dynamics.disturbance().dim());
    let us = dynamics.control().lattice(opts.control_samples);
    let vs = dynamics.disturbance().lattice(opts.disturbance_samples);
    let n_u = if m == 0 { 1 } else { us.len() / m };
    let n_v = if q == 0 { 1 } else { vs.len() / q };

    let mut tube = ValueTube::new(grid.clone());
    let mut v = field_max(l, h)?;
    tube.push(t_final, v.clone())?;
    let mut far = 0usize;

    for k in 1..=steps {
        let prev = &v;
        let results: Vec<(f64, usize)> = (0..grid.len())
            .into_par_iter()
            .map_init(
                || (vec![0.0; n], vec![0.0; n], vec![0.0; n]),
                |(x, f, y), node| {
                    grid.point(node, x);
                    let mut misses = 0;
                    let mut game = f64::NEG_INFINITY;
                    for b in 0..n_v {
                        let vv = &vs[b * q..(b + 1) * q];
                        let mut inner = f64::INFINITY;
                        for a in 0..n_u {
                            let uu = &us[a * m..(a + 1) * m];
                            dynamics.eval(x, uu, vv, f);
                            for i in 0..n {
                                y[i] = x[i] + dt * f[i];
                            }
                            if far_outside(&grid, y) {
                                misses += 1;
                            }
                            inner = inner.min(prev.interpolate(y));
                        }
                        game = game.max(inner);
                    }
                    let here = prev.values()[node];
                    let value = match opts.mode {
                        Mode::Terminal => game,
                        Mode::Anytime => here.min(game),
                    };
                    (value.max(h.values()[node]), misses)
                },
            )
            .collect();
        far += results.iter().map(|r| r.1).sum::<usize>();
        let values: Vec<f64> = results.into_iter().map(|r| r.0).collect();
        v = ScalarField::new(grid.clone(), values)?;
        let t = if k == steps {
            t0
        } else {
            t_final - k as f64 * dt
        };
        tube.push(t, v.clone())?;
    }
    tube.steps = steps;
    if far > 0 {
        tube.warnings.push(format!(
            "{far} oracle lookups stepped more than one cell outside the grid and were clamped"
        ));
    }
    Ok(tube)
}

fn times_match(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs())))
}

/// Largest nodewise difference and the number of nodes whose zero-sublevel
/// membership differs, over all frames.
pub fn compare_tubes(a: &ValueTube, b: &ValueTube) -> Result<(f64, usize)> {
    if !same_grid(a.grid(), b.grid()) {
        return Err(Error::GridMismatch);
    }
    if !times_match(a.times(), b.times()) {
        return Err(Error::TimeMismatch);
    }
    let mut linf = 0.0f64;
    let mut mismatch = 0usize;
    for (fa, fb) in a.fields().iter().zip(b.fields()) {
        for (x, y) in fa.values().iter().zip(fb.values()) {
            linf = linf.max((x - y).abs());
            if (*x <= 0.0) != (*y <= 0.0) {
                mismatch += 1;
            }
        }
    }
    Ok((linf, mismatch))
}

/// Nodes whose 3^n neighbourhood contains both members and non-members of
/// the zero sublevel set.
fn contour_band(field: &ScalarField) -> Vec<bool> {
    let grid = field.grid();
    let n = grid.dim();
    let vals = field.values();
    let mut band = vec![false; grid.len()];
    let mut idx = vec![0usize; n];
    let mut nb = vec![0usize; n];
    let offsets = 3usize.pow(n as u32);
    for node in 0..grid.len() {
        grid.unravel(node, &mut idx);
        let inside = vals[node] <= 0.0;
        'off: for o in 0..offsets {
            let mut r = o;
            for i in 0..n {
                let d = (r % 3) as isize - 1;
                r /= 3;
                let c = idx[i] as isize + d;
                if c < 0 || c >= grid.axis(i).nodes as isize {
                    continue 'off;
                }
                nb[i] = c as usize;
            }
            if (vals[grid.index(&nb)] <= 0.0) != inside {
                band[node] = true;
                break;
            }
        }
    }
    band
}

/// True when every node where the two zero-sublevel sets disagree lies
/// within one cell of either field's zero contour.
pub fn mismatches_in_band(a: &ScalarField, b: &ScalarField) -> Result<bool> {
    if !same_grid(a.grid(), b.grid()) {
        return Err(Error::GridMismatch);
    }
    let (ba, bb) = (contour_band(a), contour_band(b));
    Ok(a.values()
        .iter()
        .zip(b.values())
        .enumerate()
        .all(|(k, (x, y))| (*x <= 0.0) == (*y <= 0.0) || ba[k] || bb[k]))
}
