//! Uniform Cartesian grids and nodal scalar fields.
//!
//! Values are stored row-major: the last axis varies fastest. Node `k` on
//! axis `i` sits exactly at `min_i + k * dx_i`.

mod geometry;
mod io;

use std::sync::Arc;

pub(crate) use geometry::box_distance;
pub use geometry::{implicit_field, GeometrySpec};
pub use io::{read_field_csv, write_field_csv};

use crate::error::{Error, Result};

/// One axis of a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, nodes: usize) -> Self {
        Self { min, max, nodes }
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.nodes - 1) as f64
    }

    pub fn coord(&self, k: usize) -> f64 {
        if k + 1 == self.nodes {
            return self.max;
        }
        self.min + k as f64 * self.spacing()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("a grid needs at least one axis".into()));
        }
        for (i, a) in axes.iter().enumerate() {
            if !(a.min.is_finite() && a.max.is_finite()) {
                return Err(Error::InvalidGrid(format!("axis {i} has non-finite bounds")));
            }
            if a.min >= a.max {
                return Err(Error::InvalidGrid(format!(
                    "axis {i}: min {} must be below max {}",
                    a.min, a.max
                )));
            }
            if a.nodes < 2 {
                return Err(Error::InvalidGrid(format!("axis {i} needs at least 2 nodes")));
            }
        }
        let mut strides = vec![1; axes.len()];
        for i in (0..axes.len() - 1).rev() {
            strides[i] = strides[i + 1] * axes[i + 1].nodes;
        }
        let len = axes.iter().map(|a| a.nodes).product();
        Ok(Self { axes, strides, len })
    }

    /// Shorthand for a grid given per-axis `(min, max, nodes)`.
    pub fn uniform(spec: &[(f64, f64, usize)]) -> Result<Self> {
        Self::new(spec.iter().map(|&(a, b, n)| Axis::new(a, b, n)).collect())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn spacing(&self, i: usize) -> f64 {
        self.axes[i].spacing()
    }

    pub fn stride(&self, i: usize) -> usize {
        self.strides[i]
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    /// Per-axis node index of flat node `flat`, written into `out`.
    pub fn unravel(&self, flat: usize, out: &mut [usize]) {
        let mut rem = flat;
        for (i, s) in self.strides.iter().enumerate() {
            out[i] = rem / s;
            rem %= s;
        }
    }

    /// Node index along `axis` only.
    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.axes[axis].nodes
    }

    /// Coordinates of flat node `flat`, written into `out`.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for (i, s) in self.strides.iter().enumerate() {
            out[i] = self.axes[i].coord(rem / s);
            rem %= s;
        }
    }

    pub fn point_vec(&self, flat: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        self.point(flat, &mut p);
        p
    }

    /// True when the node touches the outer boundary of the domain.
    pub fn is_boundary(&self, flat: usize) -> bool {
        (0..self.dim()).any(|i| {
            let k = self.axis_index(flat, i);
            k == 0 || k + 1 == self.axes[i].nodes
        })
    }

    pub fn lower(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.min).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.max).collect()
    }
}

/// Nodal values on a grid. Never holds NaN or infinities.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid) && self.values == other.values
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn check_finite(values: &[f64], context: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(node) => Err(Error::NonFinite {
            node,
            value: values[node],
            context: context.to_string(),
        }),
    }
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "field values",
                expected: grid.len(),
                got: values.len(),
            });
        }
        check_finite(&values, "field construction")?;
        Ok(Self { grid, values })
    }

    /// Caller guarantees length and finiteness.
    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![value; n])
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut p = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                grid.point(i, &mut p);
                f(&p)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_parts(self.grid.clone(), values))
    }

    pub fn negated(&self) -> Self {
        Self::from_parts(self.grid.clone(), self.values.iter().map(|v| -v).collect())
    }

    /// Multilinear interpolation; coordinates outside the domain are clamped
    /// to the boundary.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &*self.grid;
        let d = g.dim();
        debug_assert_eq!(x.len(), d);
        // Base corner and fractional offset per axis.
        let mut base = 0usize;
        let mut frac = [0.0f64; 8];
        let mut steps = [0usize; 8];
        let mut frac_v;
        let mut steps_v;
        let (frac, steps): (&mut [f64], &mut [usize]) = if d <= 8 {
            (&mut frac[..d], &mut steps[..d])
        } else {
            frac_v = vec![0.0; d];
            steps_v = vec![0usize; d];
            (&mut frac_v[..], &mut steps_v[..])
        };
        for i in 0..d {
            let a = g.axis(i);
            let h = a.spacing();
            let mut t = ((x[i].clamp(a.min, a.max)) - a.min) / h;
            // Snap rounding noise so node queries return stored values.
            if (t - t.round()).abs() <= 1e-9 {
                t = t.round();
            }
            let mut k = t.floor() as usize;
            if k >= a.nodes - 1 {
                k = a.nodes - 2;
            }
            frac[i] = (t - k as f64).clamp(0.0, 1.0);
            steps[i] = g.stride(i);
            base += k * g.stride(i);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = base;
            for i in 0..d {
                if corner >> i & 1 == 1 {
                    w *= frac[i];
                    idx += steps[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }
}

/// Nodewise maximum of two fields on the same grid.
pub fn field_max(a: &ScalarField, b: &ScalarField) -> Result<ScalarField> {
    a.zip_with(b, f64::max)
}

/// Nodewise minimum of two fields on the same grid.
pub fn field_min(a: &ScalarField, b: &ScalarField) -> Result<ScalarField> {
    a.zip_with(b, f64::min)
}

/// Backward and forward differences along `axis`.
///
/// At the low edge the backward difference copies the forward one, and at
/// the high edge the forward difference copies the backward one.
pub fn one_sided_derivatives(field: &ScalarField, axis: usize) -> (ScalarField, ScalarField) {
    let g = field.grid();
    let n = g.axis(axis).nodes;
    let stride = g.stride(axis);
    let h = g.spacing(axis);
    let v = field.values();
    let mut dm = vec![0.0; v.len()];
    let mut dp = vec![0.0; v.len()];
    for i in 0..v.len() {
        let k = g.axis_index(i, axis);
        let back = if k > 0 { Some((v[i] - v[i - stride]) / h) } else { None };
        let fwd = if k + 1 < n { Some((v[i + stride] - v[i]) / h) } else { None };
        // n >= 2 guarantees at least one side exists.
        dm[i] = back.or(fwd).unwrap();
        dp[i] = fwd.or(back).unwrap();
    }
    (
        ScalarField::from_parts(g.clone(), dm),
        ScalarField::from_parts(g.clone(), dp),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Arc<Grid> {
        Arc::new(Grid::uniform(&[(-1.0, 1.0, n)]).unwrap())
    }

    #[test]
    fn rejects_degenerate_axes() {
        assert!(Grid::uniform(&[(0.0, 0.0, 3)]).is_err());
        assert!(Grid::uniform(&[(0.0, 1.0, 1)]).is_err());
        assert!(Grid::new(vec![]).is_err());
    }

    #[test]
    fn row_major_layout() {
        let g = Grid::uniform(&[(0.0, 1.0, 3), (0.0, 2.0, 5)]).unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(g.stride(0), 5);
        assert_eq!(g.stride(1), 1);
        let mut m = [0usize; 2];
        g.unravel(g.index(&[2, 3]), &mut m);
        assert_eq!(m, [2, 3]);
        assert_eq!(g.point_vec(g.index(&[1, 4])), vec![0.5, 2.0]);
    }

    #[test]
    fn node_coordinates_are_exact() {
        let a = Axis::new(-2.0, 2.0, 401);
        assert_eq!(a.coord(0), -2.0);
        assert_eq!(a.coord(200), -2.0 + 200.0 * a.spacing());
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = line(3);
        assert!(matches!(
            ScalarField::new(g, vec![0.0, f64::NAN, 1.0]),
            Err(Error::NonFinite { node: 1, .. })
        ));
    }

    #[test]
    fn interpolation_is_exact_at_nodes() {
        let g = line(5);
        let f = ScalarField::from_fn(g.clone(), |x| x[0] * x[0]).unwrap();
        for i in 0..5 {
            let x = g.point_vec(i);
            assert_eq!(f.interpolate(&x), f.values()[i]);
        }
    }

    #[test]
    fn interpolation_midpoint_and_clamp() {
        let g = Arc::new(Grid::uniform(&[(0.0, 1.0, 2)]).unwrap());
        let f = ScalarField::new(g, vec![2.0, 4.0]).unwrap();
        assert_eq!(f.interpolate(&[0.5]), 3.0);
        assert_eq!(f.interpolate(&[7.0]), 4.0);
        assert_eq!(f.interpolate(&[-1e9]), 2.0);
    }

    #[test]
    fn bilinear_reproduces_bilinear_functions() {
        let g = Arc::new(Grid::uniform(&[(0.0, 1.0, 4), (0.0, 2.0, 3)]).unwrap());
        let f = ScalarField::from_fn(g, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]).unwrap();
        let (x, y) = (0.37, 1.21);
        let exact = 1.0 + 2.0 * x - y + 0.5 * x * y;
        assert!((f.interpolate(&[x, y]) - exact).abs() < 1e-12);
    }

    #[test]
    fn derivatives_of_linear_and_constant_fields() {
        let g = line(11);
        let f = ScalarField::from_fn(g.clone(), |x| 3.0 * x[0] - 1.0).unwrap();
        let (dm, dp) = one_sided_derivatives(&f, 0);
        for i in 0..11 {
            assert!((dm.values()[i] - 3.0).abs() < 1e-12);
            assert!((dp.values()[i] - 3.0).abs() < 1e-12);
        }
        let c = ScalarField::constant(g, 4.0).unwrap();
        let (dm, dp) = one_sided_derivatives(&c, 0);
        assert!(dm.values().iter().chain(dp.values()).all(|&d| d == 0.0));
    }

    #[test]
    fn derivatives_at_a_kink() {
        let g = line(11);
        let f = ScalarField::from_fn(g, |x| x[0].abs()).unwrap();
        let (dm, dp) = one_sided_derivatives(&f, 0);
        assert!((dm.values()[5] + 1.0).abs() < 1e-12);
        assert!((dp.values()[5] - 1.0).abs() < 1e-12);
        // Edge extrapolation.
        assert_eq!(dm.values()[0], dp.values()[0]);
        assert_eq!(dp.values()[10], dm.values()[10]);
    }

    #[test]
    fn max_min_identities() {
        let g = line(7);
        let a = ScalarField::from_fn(g.clone(), |x| x[0].sin()).unwrap();
        let b = ScalarField::from_fn(g.clone(), |x| x[0] * 0.3).unwrap();
        assert_eq!(field_max(&a, &a).unwrap(), a);
        let floor = ScalarField::constant(g.clone(), -1e300).unwrap();
        assert_eq!(field_max(&a, &floor).unwrap(), a);
        let lhs = field_max(&a.negated(), &b.negated()).unwrap().negated();
        assert_eq!(lhs, field_min(&a, &b).unwrap());
        let other = ScalarField::constant(line(8), 0.0).unwrap();
        assert_eq!(field_max(&a, &other), Err(Error::GridMismatch));
    }
}
