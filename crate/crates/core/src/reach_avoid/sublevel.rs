//! Zero-sublevel masks and contour extraction.

use std::collections::HashMap;

use crate::grid::{Grid, ScalarField};

/// A contour piece in full grid coordinates. In one dimension each piece
/// is a single crossing point.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<Vec<f64>>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sublevel {
    pub mask: Vec<bool>,
    pub contours: Vec<Polyline>,
}

impl Sublevel {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|m| *m)
    }
}

/// Nodes with `value <= level`.
pub fn sublevel_mask(field: &ScalarField, level: f64) -> Vec<bool> {
    field.values().iter().map(|v| *v <= level).collect()
}

/// Mask of `{value <= level}` plus its contour: crossing points in one
/// dimension, marching-squares polylines on every slice of the first two
/// axes otherwise.
pub fn sublevel_set(field: &ScalarField, level: f64) -> Sublevel {
    let mask = sublevel_mask(field, level);
    let contours = if field.grid().dim() == 1 {
        crossings_1d(field, level)
    } else {
        let g = field.grid();
        let slice_len = g.axis(0).nodes * g.axis(1).nodes;
        let slices = g.len() / slice_len;
        let mut out = Vec::new();
        for s in 0..slices {
            out.extend(marching_squares(field, level, s));
        }
        out
    };
    Sublevel { mask, contours }
}

fn crossings_1d(field: &ScalarField, level: f64) -> Vec<Polyline> {
    let g = field.grid();
    let v = field.values();
    let mut out = Vec::new();
    for k in 0..v.len() - 1 {
        let (a, b) = (v[k], v[k + 1]);
        if (a <= level) != (b <= level) {
            let t = (level - a) / (b - a);
            let (xa, xb) = (g.axis(0).coord(k), g.axis(0).coord(k + 1));
            out.push(Polyline {
                points: vec![vec![xa + t * (xb - xa)]],
                closed: false,
            });
        }
    }
    out
}

/// Edge of the 2D slice lattice: `(horizontal, i, j)` where a horizontal
/// edge joins `(i, j)`-`(i + 1, j)` and a vertical edge `(i, j)`-`(i, j + 1)`.
type EdgeId = (bool, usize, usize);

fn marching_squares(field: &ScalarField, level: f64, slice: usize) -> Vec<Polyline> {
    let g: &Grid = field.grid();
    let (n0, n1) = (g.axis(0).nodes, g.axis(1).nodes);
    let (s0, s1) = (g.stride(0), g.stride(1));
    // Offset of the slice among the remaining axes, which are faster in
    // row-major order than axes 0 and 1.
    let rest = g.len() / (n0 * n1);
    let base = slice;
    debug_assert!(slice < rest);
    let idx = |i: usize, j: usize| base + i * s0 + j * s1;
    let val = |i: usize, j: usize| field.values()[idx(i, j)];

    let mut fixed = vec![0.0; g.dim()];
    if g.dim() > 2 {
        let p = g.point_vec(base);
        fixed.copy_from_slice(&p);
    }
    let edge_point = |e: EdgeId| -> Vec<f64> {
        let (horiz, i, j) = e;
        let (i2, j2) = if horiz { (i + 1, j) } else { (i, j + 1) };
        let (a, b) = (val(i, j), val(i2, j2));
        let t = (level - a) / (b - a);
        let mut p = fixed.clone();
        let (x0, y0) = (g.axis(0).coord(i), g.axis(1).coord(j));
        let (x1, y1) = (g.axis(0).coord(i2), g.axis(1).coord(j2));
        p[0] = x0 + t * (x1 - x0);
        p[1] = y0 + t * (y1 - y0);
        p
    };

    let mut segments: Vec<(EdgeId, EdgeId)> = Vec::new();
    for i in 0..n0 - 1 {
        for j in 0..n1 - 1 {
            let c = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
            let inside = c.map(|v| v <= level);
            let code = inside
                .iter()
                .enumerate()
                .fold(0u8, |acc, (k, &b)| acc | ((b as u8) << k));
            if code == 0 || code == 15 {
                continue;
            }
            // Edges: bottom (i,j)-(i+1,j), right (i+1,j)-(i+1,j+1),
            // top (i,j+1)-(i+1,j+1), left (i,j)-(i,j+1).
            let bottom = (true, i, j);
            let right = (false, i + 1, j);
            let top = (true, i, j + 1);
            let left = (false, i, j);
            let crosses = |a: usize, b: usize| inside[a] != inside[b];
            let mut edges = Vec::with_capacity(4);
            if crosses(0, 1) {
                edges.push(bottom);
            }
            if crosses(1, 2) {
                edges.push(right);
            }
            if crosses(3, 2) {
                edges.push(top);
            }
            if crosses(0, 3) {
                edges.push(left);
            }
            if edges.len() == 2 {
                segments.push((edges[0], edges[1]));
            } else {
                // Saddle: decide connectivity from the cell average.
                let center_inside = (c.iter().sum::<f64>() / 4.0) <= level;
                if inside[0] == center_inside {
                    // Corner 0 connects to corner 2 through the centre, so
                    // corners 1 and 3 are cut off.
                    segments.push((bottom, right));
                    segments.push((top, left));
                } else {
                    segments.push((bottom, left));
                    segments.push((right, top));
                }
            }
        }
    }
    join(&segments, edge_point)
}

fn join(segments: &[(EdgeId, EdgeId)], point: impl Fn(EdgeId) -> Vec<f64>) -> Vec<Polyline> {
    let mut by_edge: HashMap<EdgeId, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        by_edge.entry(*a).or_default().push(k);
        by_edge.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let other = |k: usize, e: EdgeId| if segments[k].0 == e { segments[k].1 } else { segments[k].0 };
    let next_unused = |e: EdgeId, used: &[bool]| -> Option<usize> {
        by_edge[&e].iter().copied().find(|&k| !used[k])
    };
    let mut out = Vec::new();
    // Open chains first start at edges touched by a single segment.
    let mut starts: Vec<usize> = (0..segments.len()).collect();
    starts.sort_by_key(|&k| {
        let (a, b) = segments[k];
        !(by_edge[&a].len() == 1 || by_edge[&b].len() == 1)
    });
    for k0 in starts {
        if used[k0] {
            continue;
        }
        used[k0] = true;
        let (a, b) = segments[k0];
        let (first, mut cur) = if by_edge[&b].len() == 1 && by_edge[&a].len() != 1 {
            (b, a)
        } else {
            (a, b)
        };
        let mut chain = vec![first, cur];
        while let Some(k) = next_unused(cur, &used) {
            used[k] = true;
            cur = other(k, cur);
            chain.push(cur);
        }
        let closed = chain.len() > 2 && chain[0] == *chain.last().unwrap();
        if closed {
            chain.pop();
        }
        out.push(Polyline {
            points: chain.into_iter().map(&point).collect(),
            closed,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::{implicit_field, GeometrySpec};

    #[test]
    fn box_mask_is_interior_nodes() {
        let g = Arc::new(Grid::uniform(&[(-2.0, 2.0, 9), (-2.0, 2.0, 9)]).unwrap());
        let f = implicit_field(&g, &GeometrySpec::boxed(vec![-1.0, -1.0], vec![1.0, 1.0])).unwrap();
        let s = sublevel_set(&f, 0.0);
        for k in 0..g.len() {
            let p = g.point_vec(k);
            assert_eq!(s.mask[k], p[0].abs() <= 1.0 && p[1].abs() <= 1.0);
        }
    }

    #[test]
    fn infinite_level_takes_everything() {
        let g = Arc::new(Grid::uniform(&[(-1.0, 1.0, 5)]).unwrap());
        let f = ScalarField::from_fn(g, |x| x[0]).unwrap();
        let s = sublevel_set(&f, f64::INFINITY);
        assert!(s.mask.iter().all(|m| *m));
        assert!(s.contours.is_empty());
    }

    #[test]
    fn roots_of_parabola() {
        let g = Arc::new(Grid::uniform(&[(-2.0, 2.0, 401)]).unwrap());
        let dx = g.spacing(0);
        let f = ScalarField::from_fn(g, |x| x[0] * x[0] - 1.0).unwrap();
        let s = sublevel_set(&f, 0.0);
        let roots: Vec<f64> = s.contours.iter().map(|c| c.points[0][0]).collect();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] + 1.0).abs() <= dx && (roots[1] - 1.0).abs() <= dx);
    }

    #[test]
    fn circle_contour_is_one_closed_loop() {
        let g = Arc::new(Grid::uniform(&[(-2.0, 2.0, 41), (-2.0, 2.0, 41)]).unwrap());
        let f = ScalarField::from_fn(g.clone(), |x| x[0].hypot(x[1]) - 1.0).unwrap();
        let s = sublevel_set(&f, 0.0);
        assert_eq!(s.contours.len(), 1);
        let c = &s.contours[0];
        assert!(c.closed);
        for p in &c.points {
            assert!((p[0].hypot(p[1]) - 1.0).abs() < g.spacing(0));
        }
    }

    #[test]
    fn open_contour_across_domain() {
        let g = Arc::new(Grid::uniform(&[(0.0, 1.0, 11), (0.0, 1.0, 11)]).unwrap());
        let f = ScalarField::from_fn(g, |x| x[0] - 0.45).unwrap();
        let s = sublevel_set(&f, 0.0);
        assert_eq!(s.contours.len(), 1);
        assert!(!s.contours[0].closed);
        assert_eq!(s.contours[0].points.len(), 11);
        assert!(s.contours[0].points.iter().all(|p| (p[0] - 0.45).abs() < 1e-12));
    }

    #[test]
    fn slices_of_a_3d_field() {
        let g = Arc::new(Grid::uniform(&[(-2.0, 2.0, 21), (-2.0, 2.0, 21), (0.0, 1.0, 3)]).unwrap());
        let f = ScalarField::from_fn(g, |x| x[0].hypot(x[1]) - 1.0 - x[2] * 0.5).unwrap();
        let s = sublevel_set(&f, 0.0);
        assert_eq!(s.contours.len(), 3);
        for c in &s.contours {
            let z = c.points[0][2];
            for p in &c.points {
                assert_eq!(p[2], z);
            }
        }
    }
}
