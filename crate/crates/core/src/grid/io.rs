//! CSV export of nodal fields.
//!
//! Header `axis0,axis1,...,value`, then one node per line in row-major
//! order. Numbers carry 17 significant digits so the round trip is exact.

use std::io::{BufRead, Write};
use std::sync::Arc;

use super::{Axis, Grid, ScalarField};
use crate::error::{Error, Result};

pub fn write_field_csv<W: Write>(field: &ScalarField, mut out: W) -> std::io::Result<()> {
    let g = field.grid();
    let d = g.dim();
    let header: Vec<String> = (0..d).map(|i| format!("axis{i}")).collect();
    writeln!(out, "{},value", header.join(","))?;
    let mut p = vec![0.0; d];
    let mut line = String::new();
    for (i, v) in field.values().iter().enumerate() {
        g.point(i, &mut p);
        line.clear();
        for c in &p {
            line.push_str(&format!("{c:.16e},"));
        }
        line.push_str(&format!("{v:.16e}"));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a field written by [`write_field_csv`]. The grid is reconstructed
/// from the distinct coordinates on each axis.
pub fn read_field_csv<R: BufRead>(input: R) -> Result<ScalarField> {
    let bad = |msg: String| Error::InvalidArgument(format!("field csv: {msg}"));
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("empty input".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 2 || cols.last() != Some(&"value") {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let d = cols.len() - 1;
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut values = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", n + 2)))?;
        if nums.len() != d + 1 {
            return Err(bad(format!("line {}: expected {} columns", n + 2, d + 1)));
        }
        values.push(nums[d]);
        points.push(nums[..d].to_vec());
    }
    let mut axes = Vec::with_capacity(d);
    for i in 0..d {
        let mut coords: Vec<f64> = points.iter().map(|p| p[i]).collect();
        coords.sort_by(f64::total_cmp);
        coords.dedup();
        if coords.len() < 2 {
            return Err(bad(format!("axis {i} has fewer than 2 distinct coordinates")));
        }
        axes.push(Axis::new(coords[0], coords[coords.len() - 1], coords.len()));
    }
    let grid = Arc::new(Grid::new(axes)?);
    ScalarField::new(grid, values)
}
