//! Constructive geometry evaluated as implicit functions on a grid.
//!
//! Sign convention: negative inside, positive outside. Single boxes and
//! cylinders give exact signed distances; boolean combinations use min/max
//! and keep the zero level exact but not the distance property.

use std::sync::Arc;

use super::{Grid, ScalarField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum GeometrySpec {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// Finite cylinder whose symmetry axis is grid axis `axis`. The radial
    /// distance is measured over all remaining axes.
    Cylinder {
        axis: usize,
        center: Vec<f64>,
        radius: f64,
        half_height: f64,
    },
    Union(Vec<GeometrySpec>),
    Intersection(Vec<GeometrySpec>),
    Complement(Box<GeometrySpec>),
}

impl GeometrySpec {
    pub fn boxed(lower: impl Into<Vec<f64>>, upper: impl Into<Vec<f64>>) -> Self {
        GeometrySpec::Box {
            lower: lower.into(),
            upper: upper.into(),
        }
    }

    pub fn complement(inner: GeometrySpec) -> Self {
        GeometrySpec::Complement(Box::new(inner))
    }

    /// Checks the tree against a state dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            GeometrySpec::Box { lower, upper } => {
                check_len("box lower corner", lower.len(), dim)?;
                check_len("box upper corner", upper.len(), dim)?;
                for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
                    if !(l.is_finite() && u.is_finite()) || l > u {
                        return Err(Error::InvalidArgument(format!(
                            "box bounds on axis {i} must be finite and ordered, got [{l}, {u}]"
                        )));
                    }
                }
                Ok(())
            }
            GeometrySpec::Cylinder {
                axis,
                center,
                radius,
                half_height,
            } => {
                check_len("cylinder center", center.len(), dim)?;
                if *axis >= dim {
                    return Err(Error::InvalidArgument(format!(
                        "cylinder axis {axis} does not exist in {dim} dimensions"
                    )));
                }
                if !(*radius > 0.0 && *half_height >= 0.0) {
                    return Err(Error::InvalidArgument(
                        "cylinder needs positive radius and non-negative half height".into(),
                    ));
                }
                Ok(())
            }
            GeometrySpec::Union(parts) | GeometrySpec::Intersection(parts) => {
                if parts.is_empty() {
                    return Err(Error::EmptyUnion);
                }
                parts.iter().try_for_each(|p| p.validate(dim))
            }
            GeometrySpec::Complement(inner) => inner.validate(dim),
        }
    }

    /// Implicit function value at a point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            GeometrySpec::Box { lower, upper } => box_distance(lower, upper, x),
            GeometrySpec::Cylinder {
                axis,
                center,
                radius,
                half_height,
            } => {
                let radial = x
                    .iter()
                    .zip(center)
                    .enumerate()
                    .filter(|(i, _)| i != axis)
                    .map(|(_, (a, c))| (a - c) * (a - c))
                    .sum::<f64>()
                    .sqrt();
                let dr = radial - radius;
                let da = (x[*axis] - center[*axis]).abs() - half_height;
                dr.max(da).min(0.0) + dr.max(0.0).hypot(da.max(0.0))
            }
            GeometrySpec::Union(parts) => parts
                .iter()
                .map(|p| p.eval(x))
                .fold(f64::INFINITY, f64::min),
            GeometrySpec::Intersection(parts) => parts
                .iter()
                .map(|p| p.eval(x))
                .fold(f64::NEG_INFINITY, f64::max),
            GeometrySpec::Complement(inner) => -inner.eval(x),
        }
    }
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

/// Exact signed distance to an axis-aligned box.
pub(crate) fn box_distance(lower: &[f64], upper: &[f64], x: &[f64]) -> f64 {
    let mut outside = 0.0;
    let mut inside = f64::NEG_INFINITY;
    for i in 0..x.len() {
        let c = 0.5 * (lower[i] + upper[i]);
        let half = 0.5 * (upper[i] - lower[i]);
        let q = (x[i] - c).abs() - half;
        if q > 0.0 {
            outside += q * q;
        }
        inside = inside.max(q);
    }
    outside.sqrt() + inside.min(0.0)
}

/// Samples the implicit function of `geom` at every node of `grid`.
pub fn implicit_field(grid: &Arc<Grid>, geom: &GeometrySpec) -> Result<ScalarField> {
    geom.validate(grid.dim())?;
    ScalarField::from_fn(grid.clone(), |x| geom.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Arc<Grid> {
        Arc::new(Grid::uniform(&[(-2.0, 2.0, 9)]).unwrap())
    }

    #[test]
    fn box_center_and_exterior() {
        let g = line();
        let f = implicit_field(&g, &GeometrySpec::boxed([-0.5], [0.5])).unwrap();
        assert_eq!(f.values()[4], -0.5); // x = 0
        assert_eq!(f.values()[7], 1.0); // x = 1.5
    }

    #[test]
    fn union_takes_min() {
        let geom = GeometrySpec::Union(vec![
            GeometrySpec::boxed([-2.0], [-1.0]),
            GeometrySpec::boxed([1.0], [2.0]),
        ]);
        assert_eq!(geom.eval(&[0.0]), 1.0);
        assert_eq!(geom.eval(&[0.25]), 0.75);
    }

    #[test]
    fn intersection_and_complement() {
        let a = GeometrySpec::boxed([-1.0], [1.0]);
        let b = GeometrySpec::boxed([0.0], [2.0]);
        let both = GeometrySpec::Intersection(vec![a.clone(), b]);
        assert!(both.eval(&[0.5]) < 0.0);
        assert!(both.eval(&[-0.5]) > 0.0);
        let not_a = GeometrySpec::complement(a.clone());
        assert_eq!(not_a.eval(&[0.3]), -a.eval(&[0.3]));
    }

    #[test]
    fn empty_union_is_an_error() {
        let g = line();
        assert_eq!(
            implicit_field(&g, &GeometrySpec::Union(vec![])),
            Err(Error::EmptyUnion)
        );
    }

    #[test]
    fn box_corner_distance_is_euclidean() {
        let geom = GeometrySpec::boxed([0.0, 0.0], [1.0, 1.0]);
        assert!((geom.eval(&[4.0, 5.0]) - 5.0).abs() < 1e-12);
        assert!((geom.eval(&[0.5, 0.25]) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn cylinder_distance() {
        let cyl = GeometrySpec::Cylinder {
            axis: 2,
            center: vec![0.0, 0.0, 0.0],
            radius: 2.0,
            half_height: 1.0,
        };
        assert!((cyl.eval(&[3.0, 4.0, 0.0]) - 3.0).abs() < 1e-12);
        assert!((cyl.eval(&[0.0, 0.0, 3.0]) - 2.0).abs() < 1e-12);
        assert!((cyl.eval(&[0.0, 0.0, 0.0]) + 1.0).abs() < 1e-12);
        assert!((cyl.eval(&[5.0, 0.0, 5.0]) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = line();
        assert!(implicit_field(&g, &GeometrySpec::boxed([0.0, 0.0], [1.0, 1.0])).is_err());
    }
}
