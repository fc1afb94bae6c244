//! Conflict detection between aircraft reachable sets and the box-shaped
//! obstacles built from it.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::sublevel::sublevel_mask;
use crate::dynamics::AircraftModel;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::solver::ValueTube;

/// Obstacle value meaning "no obstacle here".
pub const NO_OBSTACLE: f64 = -1e6;

pub const NMI: f64 = 1852.0;
pub const FT: f64 = 0.3048;

/// Protected zone: a cylinder centred on the aircraft.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separation {
    pub horizontal: f64,
    /// Full cylinder height; two aircraft conflict vertically when their
    /// altitudes differ by at most half of it.
    pub height: f64,
}

impl Default for Separation {
    fn default() -> Self {
        Self {
            horizontal: 5.0 * NMI,
            height: 2000.0 * FT,
        }
    }
}

impl Separation {
    pub fn vertical(&self) -> f64 {
        0.5 * self.height
    }

    pub fn in_conflict(&self, a: &[f64; 3], b: &[f64; 3]) -> bool {
        (a[0] - b[0]).hypot(a[1] - b[1]) <= self.horizontal && (a[2] - b[2]).abs() <= self.vertical()
    }
}

/// Conflict set of one aircraft against one intruder at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictZone {
    pub time: f64,
    pub aircraft: usize,
    pub intruder: usize,
    pub mask: Vec<bool>,
    /// Inflated bounding box `A_ji`; `None` when the mask is empty.
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl ConflictZone {
    pub fn is_empty(&self) -> bool {
        self.bounds.is_none()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// 3D positions of the occupied nodes of one aircraft, bucketed on a
/// horizontal lattice with the separation radius as cell size.
pub(crate) struct Occupancy {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<[f64; 3]>>,
}

impl Occupancy {
    pub(crate) fn new(model: &AircraftModel, field: &ScalarField, sep: &Separation) -> Self {
        let g = field.grid();
        let mut buckets: HashMap<(i64, i64), Vec<[f64; 3]>> = HashMap::new();
        let cell = sep.horizontal.max(f64::MIN_POSITIVE);
        let mut x = [0.0; 2];
        for (node, &v) in field.values().iter().enumerate() {
            if v > 0.0 {
                continue;
            }
            g.point(node, &mut x);
            let p = model.position_along(x[0], x[1]);
            let key = ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
            buckets.entry(key).or_default().push(p);
        }
        for pts in buckets.values_mut() {
            pts.sort_by(|a, b| a[2].total_cmp(&b[2]));
        }
        Self { cell, buckets }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub(crate) fn conflicts_with(&self, p: &[f64; 3], sep: &Separation) -> bool {
        let (bx, by) = ((p[0] / self.cell).floor() as i64, (p[1] / self.cell).floor() as i64);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(pts) = self.buckets.get(&(bx + dx, by + dy)) {
                    // Points are sorted by altitude; scan only the vertical band.
                    let start = pts.partition_point(|q| q[2] < p[2] - sep.vertical());
                    let band = pts[start..]
                        .iter()
                        .take_while(|q| q[2] <= p[2] + sep.vertical());
                    for q in band {
                        if sep.in_conflict(p, q) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

/// Nodes of aircraft `j`'s zero-sublevel set whose mapped position is in
/// conflict with some occupied node of the intruder.
pub(crate) fn conflict_mask(
    model_j: &AircraftModel,
    field_j: &ScalarField,
    intruder: &Occupancy,
    sep: &Separation,
) -> Vec<bool> {
    if intruder.is_empty() {
        return vec![false; field_j.values().len()];
    }
    let g = field_j.grid();
    (0..g.len())
        .into_par_iter()
        .map_init(
            || [0.0; 2],
            |x, node| {
                if field_j.values()[node] > 0.0 {
                    return false;
                }
                g.point(node, x);
                let p = model_j.position_along(x[0], x[1]);
                intruder.conflicts_with(&p, sep)
            },
        )
        .collect()
}

/// Bounding box of the masked nodes, inflated by one cell per axis.
pub fn inflated_bounds(grid: &Grid, mask: &[bool]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = grid.dim();
    let mut lo = vec![usize::MAX; n];
    let mut hi = vec![0usize; n];
    let mut idx = vec![0usize; n];
    let mut any = false;
    for (node, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        any = true;
        grid.unravel(node, &mut idx);
        for i in 0..n {
            lo[i] = lo[i].min(idx[i]);
            hi[i] = hi[i].max(idx[i]);
        }
    }
    if !any {
        return None;
    }
    let lower = (0..n)
        .map(|i| grid.axis(i).coord(lo[i]) - grid.spacing(i))
        .collect();
    let upper = (0..n)
        .map(|i| grid.axis(i).coord(hi[i]) + grid.spacing(i))
        .collect();
    Some((lower, upper))
}

/// `h_ji`: positive exactly inside the inflated box of the zone, the
/// no-obstacle sentinel when the zone is empty.
pub fn obstacle_field(zone: &ConflictZone, grid: &Arc<Grid>) -> Result<ScalarField> {
    if zone.mask.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            what: "conflict mask",
            expected: grid.len(),
            got: zone.mask.len(),
        });
    }
    match &zone.bounds {
        None => ScalarField::constant(grid.clone(), NO_OBSTACLE),
        Some((lower, upper)) => ScalarField::from_fn(grid.clone(), |x| {
            -crate::grid::box_distance(lower, upper, x)
        }),
    }
}

/// Builds the zone from a conflict mask.
pub(crate) fn zone_from_mask(
    grid: &Grid,
    time: f64,
    aircraft: usize,
    intruder: usize,
    mask: Vec<bool>,
) -> ConflictZone {
    let bounds = inflated_bounds(grid, &mask);
    ConflictZone {
        time,
        aircraft,
        intruder,
        mask,
        bounds,
    }
}

/// Conflict set of aircraft `j` against intruder `i` at time `t`, with both
/// tubes interpolated linearly in time.
pub fn conflict_detect(
    j: (usize, &AircraftModel, &ValueTube),
    i: (usize, &AircraftModel, &ValueTube),
    t: f64,
    sep: &Separation,
) -> Result<ConflictZone> {
    let (jj, model_j, tube_j) = j;
    let (ii, model_i, tube_i) = i;
    let field_j = tube_j.at_time(t)?;
    let field_i = tube_i.at_time(t)?;
    let occ = Occupancy::new(model_i, &field_i, sep);
    let mask = conflict_mask(model_j, &field_j, &occ, sep);
    Ok(zone_from_mask(tube_j.grid(), t, jj, ii, mask))
}

/// Number of nodes in a zero-sublevel set.
pub fn occupied_nodes(field: &ScalarField) -> usize {
    sublevel_mask(field, 0.0).iter().filter(|m| **m).count()
}
