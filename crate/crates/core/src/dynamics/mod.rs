//! Game dynamics `x' = f(x, u, v)` with box-constrained control `u` and
//! disturbance `v`.

mod aircraft;
mod catalog;
mod polynomial;

use std::sync::Arc;

use rayon::prelude::*;

pub use aircraft::{
    aircraft_flow, segment_transition, AircraftDynamics, AircraftModel, FlightPhase, ProfileSet,
    SpeedLookup, SpeedProfile, Transition, DEFAULT_SPEED_FRACTION, MAX_PATH_ANGLE,
};
pub use catalog::{AffineSystem, DoubleIntegrator, PlanarGame, SingleIntegrator};
pub use polynomial::{Monomial, Polynomial};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Compact axis-aligned input set. A zero-dimensional box means the player
/// is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl InputBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                what: "input box upper corner",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l > u {
                return Err(Error::InvalidArgument(format!(
                    "input box axis {i} must satisfy lower <= upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[-r, r]` on every axis.
    pub fn symmetric(radius: &[f64]) -> Result<Self> {
        Self::new(radius.iter().map(|r| -r).collect(), radius.to_vec())
    }

    pub fn empty() -> Self {
        Self {
            lower: vec![],
            upper: vec![],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Tensor lattice with `per_axis` evenly spaced samples per axis
    /// (endpoints included, so every vertex is present). Flattened,
    /// `dim()` entries per sample.
    pub fn lattice(&self, per_axis: usize) -> Vec<f64> {
        let d = self.dim();
        let per_axis = per_axis.max(2);
        let count = per_axis.pow(d as u32);
        let mut out = Vec::with_capacity(count * d);
        for mut k in 0..count {
            let mut sample = vec![0.0; d];
            for i in (0..d).rev() {
                let j = k % per_axis;
                k /= per_axis;
                let (l, u) = (self.lower[i], self.upper[i]);
                sample[i] = if j + 1 == per_axis {
                    u
                } else {
                    l + (u - l) * j as f64 / (per_axis - 1) as f64
                };
            }
            out.extend_from_slice(&sample);
        }
        out
    }

    fn check(&self, what: &'static str, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.dim(),
                got: x.len(),
            });
        }
        for (i, &v) in x.iter().enumerate() {
            if !(self.lower[i] <= v && v <= self.upper[i]) {
                return Err(Error::OutsideBox {
                    what,
                    index: i,
                    value: v,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
        }
        Ok(())
    }
}

/// How the inputs enter the flow; decides how the Hamiltonian optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputCoupling {
    /// `f = a(x) + B(x) u + C(x) v`.
    Affine,
    /// `f = g(x, u) + k(x, v)`.
    Separable,
    /// No usable structure; the Hamiltonian samples the input lattices.
    General,
}

/// A flow field `f(x, u, v)` together with its input sets.
pub trait Dynamics: Send + Sync + std::fmt::Debug {
    fn state_dim(&self) -> usize;

    fn control(&self) -> &InputBox;

    fn disturbance(&self) -> &InputBox;

    /// Writes `f(x, u, v)` into `out`. No bounds checks.
    fn eval(&self, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]);

    fn coupling(&self) -> InputCoupling {
        InputCoupling::General
    }

    /// Known per-axis bound on `|f_i|`, when the model provides one.
    fn speed_bound(&self) -> Option<Vec<f64>> {
        None
    }
}

pub type DynamicsRef = Arc<dyn Dynamics>;

/// Checked evaluation of the flow.
pub fn flow_eval(dyn_: &dyn Dynamics, x: &[f64], u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if x.len() != dyn_.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "state",
            expected: dyn_.state_dim(),
            got: x.len(),
        });
    }
    dyn_.control().check("control", u)?;
    dyn_.disturbance().check("disturbance", v)?;
    let mut out = vec![0.0; dyn_.state_dim()];
    dyn_.eval(x, u, v, &mut out);
    Ok(out)
}

/// Inflation applied to sampled flow maxima.
pub const SPEED_BOUND_MARGIN: f64 = 1.05;

const SPEED_BOUND_SAMPLES: usize = 3;

/// Per-axis bound `alpha_i >= |f_i(x, u, v)|` over the grid nodes and the
/// input lattices, inflated by 5%.
pub fn per_axis_speed_bound(dyn_: &dyn Dynamics, grid: &Grid) -> Result<Vec<f64>> {
    let n = dyn_.state_dim();
    if grid.dim() != n {
        return Err(Error::DimensionMismatch {
            what: "grid dimension",
            expected: n,
            got: grid.dim(),
        });
    }
    let us = dyn_.control().lattice(SPEED_BOUND_SAMPLES);
    let vs = dyn_.disturbance().lattice(SPEED_BOUND_SAMPLES);
    let (m, p) = (dyn_.control().dim(), dyn_.disturbance().dim());
    let n_u = if m == 0 { 1 } else { us.len() / m };
    let n_v = if p == 0 { 1 } else { vs.len() / p };

    let per_node = (0..grid.len())
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![0.0; n]),
            |(x, f), node| -> Result<Vec<f64>> {
                grid.point(node, x);
                let mut best = vec![0.0f64; n];
                for a in 0..n_u {
                    let u = &us[a * m..(a + 1) * m];
                    for b in 0..n_v {
                        let v = &vs[b * p..(b + 1) * p];
                        dyn_.eval(x, u, v, f);
                        for i in 0..n {
                            if !f[i].is_finite() {
                                return Err(Error::NonFinite {
                                    node,
                                    value: f[i],
                                    context: "flow evaluation".into(),
                                });
                            }
                            best[i] = best[i].max(f[i].abs());
                        }
                    }
                }
                Ok(best)
            },
        )
        .collect::<Result<Vec<_>>>()?;

    let mut alpha = vec![0.0f64; n];
    for b in per_node {
        for i in 0..n {
            alpha[i] = alpha[i].max(b[i]);
        }
    }
    if let Some(bound) = dyn_.speed_bound() {
        for i in 0..n {
            alpha[i] = alpha[i].max(bound[i]);
        }
    }
    Ok(alpha.into_iter().map(|a| a * SPEED_BOUND_MARGIN).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_contains_vertices() {
        let b = InputBox::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let l = b.lattice(3);
        assert_eq!(l.len(), 9 * 2);
        let pts: Vec<&[f64]> = l.chunks(2).collect();
        for v in [[-1.0, 0.0], [-1.0, 2.0], [1.0, 0.0], [1.0, 2.0], [0.0, 1.0]] {
            assert!(pts.iter().any(|p| *p == v), "missing {v:?}");
        }
        assert_eq!(InputBox::empty().lattice(3), Vec::<f64>::new());
    }

    #[test]
    fn rejects_inverted_box() {
        assert!(InputBox::new(vec![1.0], vec![0.0]).is_err());
        assert!(InputBox::new(vec![0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn flow_eval_checks_contract() {
        let d = SingleIntegrator::new(1.0, 0.5).unwrap();
        assert_eq!(flow_eval(&d, &[0.0], &[1.0], &[-0.5]).unwrap(), vec![0.5]);
        assert!(matches!(
            flow_eval(&d, &[0.0], &[1.5], &[0.0]),
            Err(Error::OutsideBox { what: "control", .. })
        ));
        assert!(matches!(
            flow_eval(&d, &[0.0, 1.0], &[0.0], &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn speed_bound_of_integrator_game() {
        let d = SingleIntegrator::new(1.0, 0.5).unwrap();
        let g = Grid::uniform(&[(-1.0, 1.0, 5)]).unwrap();
        let a = per_axis_speed_bound(&d, &g).unwrap();
        assert!(a[0] >= 1.5);
        assert!((a[0] - 1.5 * SPEED_BOUND_MARGIN).abs() < 1e-12);
    }

    #[test]
    fn zero_dynamics_have_zero_bound() {
        let d = AffineSystem::new(
            vec![Polynomial::constant(0.0)],
            vec![vec![Polynomial::constant(0.0)]],
            vec![vec![]],
            InputBox::symmetric(&[1.0]).unwrap(),
            InputBox::empty(),
        )
        .unwrap();
        let g = Grid::uniform(&[(-1.0, 1.0, 5)]).unwrap();
        assert_eq!(per_axis_speed_bound(&d, &g).unwrap(), vec![0.0]);
    }
}
