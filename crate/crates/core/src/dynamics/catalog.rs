//! Built-in dynamics.

use super::{Dynamics, InputBox, InputCoupling, Polynomial};
use crate::error::{Error, Result};

fn max_abs(b: &InputBox, i: usize) -> f64 {
    b.lower()[i].abs().max(b.upper()[i].abs())
}

fn expect_dim(what: &'static str, b: &InputBox, allowed: &[usize]) -> Result<()> {
    if allowed.contains(&b.dim()) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected: allowed[allowed.len() - 1],
            got: b.dim(),
        })
    }
}

/// `x' = u + v` in one dimension. The disturbance box may be empty.
#[derive(Debug, Clone)]
pub struct SingleIntegrator {
    control: InputBox,
    disturbance: InputBox,
}

impl SingleIntegrator {
    /// Symmetric bounds `|u| <= u_max`, `|v| <= v_max`; `v_max = 0` drops
    /// the disturbance.
    pub fn new(u_max: f64, v_max: f64) -> Result<Self> {
        let disturbance = if v_max == 0.0 {
            InputBox::empty()
        } else {
            InputBox::symmetric(&[v_max])?
        };
        Self::with_boxes(InputBox::symmetric(&[u_max])?, disturbance)
    }

    pub fn with_boxes(control: InputBox, disturbance: InputBox) -> Result<Self> {
        expect_dim("control", &control, &[1])?;
        expect_dim("disturbance", &disturbance, &[0, 1])?;
        Ok(Self {
            control,
            disturbance,
        })
    }
}

impl Dynamics for SingleIntegrator {
    fn state_dim(&self) -> usize {
        1
    }
    fn control(&self) -> &InputBox {
        &self.control
    }
    fn disturbance(&self) -> &InputBox {
        &self.disturbance
    }
    fn eval(&self, _x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] = u[0] + v.first().copied().unwrap_or(0.0);
    }
    fn coupling(&self) -> InputCoupling {
        InputCoupling::Affine
    }
    fn speed_bound(&self) -> Option<Vec<f64>> {
        let d = if self.disturbance.dim() == 1 {
            max_abs(&self.disturbance, 0)
        } else {
            0.0
        };
        Some(vec![max_abs(&self.control, 0) + d])
    }
}

/// `x0' = x1`, `x1' = u + v`.
#[derive(Debug, Clone)]
pub struct DoubleIntegrator {
    control: InputBox,
    disturbance: InputBox,
}

impl DoubleIntegrator {
    pub fn with_boxes(control: InputBox, disturbance: InputBox) -> Result<Self> {
        expect_dim("control", &control, &[1])?;
        expect_dim("disturbance", &disturbance, &[0, 1])?;
        Ok(Self {
            control,
            disturbance,
        })
    }
}

impl Dynamics for DoubleIntegrator {
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
        out[0] = x[1];
        out[1] = u[0] + v.first().copied().unwrap_or(0.0);
    }
    fn coupling(&self) -> InputCoupling {
        InputCoupling::Affine
    }
}

/// `x_i' = u_i + v_i` for `i = 0, 1`.
#[derive(Debug, Clone)]
pub struct PlanarGame {
    control: InputBox,
    disturbance: InputBox,
}

impl PlanarGame {
    pub fn new(u_max: f64, v_max: f64) -> Result<Self> {
        let disturbance = if v_max == 0.0 {
            InputBox::empty()
        } else {
            InputBox::symmetric(&[v_max, v_max])?
        };
        Self::with_boxes(InputBox::symmetric(&[u_max, u_max])?, disturbance)
    }

    pub fn with_boxes(control: InputBox, disturbance: InputBox) -> Result<Self> {
        expect_dim("control", &control, &[2])?;
        expect_dim("disturbance", &disturbance, &[0, 2])?;
        Ok(Self {
            control,
            disturbance,
        })
    }
}

impl Dynamics for PlanarGame {
    fn state_dim(&self) -> usize {
        2
    }
    fn control(&self) -> &InputBox {
        &self.control
    }
    fn disturbance(&self) -> &InputBox {
        &self.disturbance
    }
    fn eval(&self, _x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..2 {
            out[i] = u[i] + v.get(i).copied().unwrap_or(0.0);
        }
    }
    fn coupling(&self) -> InputCoupling {
        InputCoupling::Affine
    }
    fn speed_bound(&self) -> Option<Vec<f64>> {
        Some(
            (0..2)
                .map(|i| {
                    let d = if self.disturbance.dim() == 2 {
                        max_abs(&self.disturbance, i)
                    } else {
                        0.0
                    };
                    max_abs(&self.control, i) + d
                })
                .collect(),
        )
    }
}

/// `f(x, u, v) = a(x) + B(x) u + C(x) v` with polynomial entries.
#[derive(Debug, Clone)]
pub struct AffineSystem {
    drift: Vec<Polynomial>,
    control_matrix: Vec<Vec<Polynomial>>,
    disturbance_matrix: Vec<Vec<Polynomial>>,
    control: InputBox,
    disturbance: InputBox,
}

impl AffineSystem {
    /// Matrices are given row by row: `control_matrix[i][k]` multiplies
    /// `u_k` in component `i`.
    pub fn new(
        drift: Vec<Polynomial>,
        control_matrix: Vec<Vec<Polynomial>>,
        disturbance_matrix: Vec<Vec<Polynomial>>,
        control: InputBox,
        disturbance: InputBox,
    ) -> Result<Self> {
        let n = drift.len();
        if n == 0 {
            return Err(Error::InvalidArgument("affine system needs a state".into()));
        }
        for (name, mat, cols) in [
            ("control matrix", &control_matrix, control.dim()),
            ("disturbance matrix", &disturbance_matrix, disturbance.dim()),
        ] {
            if mat.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "matrix rows",
                    expected: n,
                    got: mat.len(),
                });
            }
            if let Some(row) = mat.iter().find(|r| r.len() != cols) {
                return Err(Error::InvalidArgument(format!(
                    "{name} rows need {cols} entries, found {}",
                    row.len()
                )));
            }
        }
        let all = drift
            .iter()
            .chain(control_matrix.iter().flatten())
            .chain(disturbance_matrix.iter().flatten());
        if let Some(p) = all.clone().find(|p| p.arity() > n) {
            return Err(Error::InvalidArgument(format!(
                "polynomial {p} references a state beyond x{}",
                n - 1
            )));
        }
        Ok(Self {
            drift,
            control_matrix,
            disturbance_matrix,
            control,
            disturbance,
        })
    }

    pub fn drift(&self) -> &[Polynomial] {
        &self.drift
    }
    pub fn control_matrix(&self) -> &[Vec<Polynomial>] {
        &self.control_matrix
    }
    pub fn disturbance_matrix(&self) -> &[Vec<Polynomial>] {
        &self.disturbance_matrix
    }
}

impl Dynamics for AffineSystem {
    fn state_dim(&self) -> usize {
        self.drift.len()
    }
    fn control(&self) -> &InputBox {
        &self.control
    }
    fn disturbance(&self) -> &InputBox {
        &self.disturbance
    }
    fn eval(&self, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.drift.len() {
            let mut acc = self.drift[i].eval(x);
            for (k, b) in self.control_matrix[i].iter().enumerate() {
                acc += b.eval(x) * u[k];
            }
            for (k, c) in self.disturbance_matrix[i].iter().enumerate() {
                acc += c.eval(x) * v[k];
            }
            out[i] = acc;
        }
    }
    fn coupling(&self) -> InputCoupling {
        InputCoupling::Affine
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::flow_eval;

    #[test]
    fn drift_free_affine_vanishes_at_zero_input() {
        let d = PlanarGame::new(1.0, 0.5).unwrap();
        assert_eq!(flow_eval(&d, &[0.3, -2.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn double_integrator_flow() {
        let d = DoubleIntegrator::with_boxes(
            InputBox::symmetric(&[1.0]).unwrap(),
            InputBox::empty(),
        )
        .unwrap();
        assert_eq!(flow_eval(&d, &[1.0, 2.0], &[-1.0], &[]).unwrap(), vec![2.0, -1.0]);
    }

    #[test]
    fn affine_system_matches_hand_evaluation() {
        let p = |s: &str| Polynomial::parse(s).unwrap();
        let d = AffineSystem::new(
            vec![p("x1"), p("-0.5*x0^3")],
            vec![vec![p("0")], vec![p("1 + x0^2")]],
            vec![vec![p("0.1")], vec![p("0")]],
            InputBox::symmetric(&[2.0]).unwrap(),
            InputBox::symmetric(&[1.0]).unwrap(),
        )
        .unwrap();
        let f = flow_eval(&d, &[2.0, 3.0], &[1.5], &[-1.0]).unwrap();
        assert_eq!(f, vec![3.0 - 0.1, -4.0 + 5.0 * 1.5]);
    }

    #[test]
    fn affine_system_shape_checks() {
        let p = |s: &str| Polynomial::parse(s).unwrap();
        let bad = AffineSystem::new(
            vec![p("x3")],
            vec![vec![p("1")]],
            vec![vec![]],
            InputBox::symmetric(&[1.0]).unwrap(),
            InputBox::empty(),
        );
        assert!(bad.is_err());
        let bad_rows = AffineSystem::new(
            vec![p("0"), p("0")],
            vec![vec![p("1")]],
            vec![vec![], vec![]],
            InputBox::symmetric(&[1.0]).unwrap(),
            InputBox::empty(),
        );
        assert!(bad_rows.is_err());
    }
}
