//! Game Hamiltonian `H(p, x) = sup_v inf_u p . f(x, u, v)`, its frozen
//! variant `min(0, H)` and the Lax-Friedrichs numerical Hamiltonian.
//!
//! The optimization strategy follows the input coupling of the dynamics.
//! Affine flows are optimized exactly per input axis from the sign of the
//! switching function; separable flows split into an inner minimum and an
//! outer maximum over the input lattices; anything else is sampled on the
//! full `sup_v inf_u` lattice product.

use crate::dynamics::{DynamicsRef, InputBox, InputCoupling};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HamMode {
    /// `H(p, x)`.
    Standard,
    /// `min(0, H(p, x))`, the freezing Hamiltonian.
    Frozen,
}

pub const DEFAULT_INPUT_SAMPLES: usize = 3;

#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    dynamics: DynamicsRef,
    samples: usize,
    mode: HamMode,
    u_lattice: Vec<f64>,
    v_lattice: Vec<f64>,
    u_center: Vec<f64>,
    v_center: Vec<f64>,
    u_half: Vec<f64>,
    v_half: Vec<f64>,
}

/// Reusable buffers for fast evaluation inside node loops.
#[derive(Debug, Clone)]
pub struct HamWorkspace {
    f: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

fn half_widths(b: &InputBox) -> Vec<f64> {
    b.lower()
        .iter()
        .zip(b.upper())
        .map(|(l, u)| 0.5 * (u - l))
        .collect()
}

fn count(lattice: &[f64], dim: usize) -> usize {
    if dim == 0 {
        1
    } else {
        lattice.len() / dim
    }
}

fn dot(p: &[f64], f: &[f64]) -> f64 {
    p.iter().zip(f).map(|(a, b)| a * b).sum()
}

impl HamiltonianSpec {
    pub fn new(dynamics: DynamicsRef, samples_per_input_axis: usize, mode: HamMode) -> Result<Self> {
        if samples_per_input_axis < 2 {
            return Err(Error::InvalidArgument(format!(
                "samples per input axis must be at least 2, got {samples_per_input_axis}"
            )));
        }
        let (cu, cv) = (dynamics.control(), dynamics.disturbance());
        Ok(Self {
            u_lattice: cu.lattice(samples_per_input_axis),
            v_lattice: cv.lattice(samples_per_input_axis),
            u_center: cu.center(),
            v_center: cv.center(),
            u_half: half_widths(cu),
            v_half: half_widths(cv),
            samples: samples_per_input_axis,
            mode,
            dynamics,
        })
    }

    pub fn with_mode(&self, mode: HamMode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }

    pub fn dynamics(&self) -> &DynamicsRef {
        &self.dynamics
    }

    pub fn samples_per_input_axis(&self) -> usize {
        self.samples
    }

    pub fn mode(&self) -> HamMode {
        self.mode
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn workspace(&self) -> HamWorkspace {
        HamWorkspace {
            f: vec![0.0; self.state_dim()],
            u: vec![0.0; self.dynamics.control().dim()],
            v: vec![0.0; self.dynamics.disturbance().dim()],
        }
    }

    fn flow_dot(&self, p: &[f64], x: &[f64], u: &[f64], v: &[f64], f: &mut [f64]) -> f64 {
        self.dynamics.eval(x, u, v, f);
        dot(p, f)
    }

    /// Unchecked `sup_v inf_u p . f`, ignoring the mode. A non-finite flow
    /// yields a non-finite result.
    pub(crate) fn standard(&self, p: &[f64], x: &[f64], ws: &mut HamWorkspace) -> f64 {
        match self.dynamics.coupling() {
            InputCoupling::Affine => self.affine(p, x, ws),
            InputCoupling::Separable => self.separable(p, x, ws),
            InputCoupling::General => self.general(p, x, ws),
        }
    }

    /// Unchecked evaluation honoring the mode.
    pub(crate) fn eval(&self, p: &[f64], x: &[f64], ws: &mut HamWorkspace) -> f64 {
        let h = self.standard(p, x, ws);
        match self.mode {
            HamMode::Standard => h,
            HamMode::Frozen => h.min(0.0),
        }
    }

    fn affine(&self, p: &[f64], x: &[f64], ws: &mut HamWorkspace) -> f64 {
        let HamWorkspace { f, u, v } = ws;
        u.copy_from_slice(&self.u_center);
        v.copy_from_slice(&self.v_center);
        let base = self.flow_dot(p, x, u, v, f);
        let mut h = base;
        for k in 0..u.len() {
            if self.u_half[k] == 0.0 {
                continue;
            }
            u[k] = self.u_center[k] + self.u_half[k];
            let g = self.flow_dot(p, x, u, v, f) - base;
            u[k] = self.u_center[k];
            h -= g.abs();
        }
        for k in 0..v.len() {
            if self.v_half[k] == 0.0 {
                continue;
            }
            v[k] = self.v_center[k] + self.v_half[k];
            let g = self.flow_dot(p, x, u, v, f) - base;
            v[k] = self.v_center[k];
            h += g.abs();
        }
        h
    }

    fn separable(&self, p: &[f64], x: &[f64], ws: &mut HamWorkspace) -> f64 {
        let m = self.u_center.len();
        let q = self.v_center.len();
        let f = &mut ws.f;
        let base = self.flow_dot(p, x, &self.u_center, &self.v_center, f);
        let mut inf_u = f64::INFINITY;
        for a in 0..count(&self.u_lattice, m) {
            let u = &self.u_lattice[a * m..(a + 1) * m];
            inf_u = inf_u.min(self.flow_dot(p, x, u, &self.v_center, f));
        }
        let mut sup_v = f64::NEG_INFINITY;
        for b in 0..count(&self.v_lattice, q) {
            let v = &self.v_lattice[b * q..(b + 1) * q];
            sup_v = sup_v.max(self.flow_dot(p, x, &self.u_center, v, f));
        }
        inf_u + sup_v - base
    }

    fn general(&self, p: &[f64], x: &[f64], ws: &mut HamWorkspace) -> f64 {
        let m = self.u_center.len();
        let q = self.v_center.len();
        let f = &mut ws.f;
        let mut sup_v = f64::NEG_INFINITY;
        for b in 0..count(&self.v_lattice, q) {
            let v = &self.v_lattice[b * q..(b + 1) * q];
            let mut inf_u = f64::INFINITY;
            for a in 0..count(&self.u_lattice, m) {
                let u = &self.u_lattice[a * m..(a + 1) * m];
                inf_u = inf_u.min(self.flow_dot(p, x, u, v, f));
            }
            sup_v = sup_v.max(inf_u);
        }
        sup_v
    }

    fn check_state(&self, what: &'static str, y: &[f64]) -> Result<()> {
        if y.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.state_dim(),
                got: y.len(),
            });
        }
        Ok(())
    }
}

fn finite(h: f64) -> Result<f64> {
    if h.is_finite() {
        Ok(h)
    } else {
        Err(Error::NonFinite {
            node: 0,
            value: h,
            context: "Hamiltonian evaluation".into(),
        })
    }
}

/// `sup_v inf_u p . f(x, u, v)`, regardless of the configured mode.
pub fn ham_value(spec: &HamiltonianSpec, p: &[f64], x: &[f64]) -> Result<f64> {
    spec.check_state("costate", p)?;
    spec.check_state("state", x)?;
    finite(spec.standard(p, x, &mut spec.workspace()))
}

/// `min(0, ham_value)`.
pub fn ham_frozen(spec: &HamiltonianSpec, p: &[f64], x: &[f64]) -> Result<f64> {
    Ok(ham_value(spec, p, x)?.min(0.0))
}

/// `H((D- + D+)/2, x) - sum_i alpha_i (D+_i - D-_i) / 2`, with `H` chosen
/// by the configured mode.
pub fn lax_friedrichs(
    spec: &HamiltonianSpec,
    dminus: &[f64],
    dplus: &[f64],
    x: &[f64],
    alpha: &[f64],
) -> Result<f64> {
    spec.check_state("D-", dminus)?;
    spec.check_state("D+", dplus)?;
    spec.check_state("alpha", alpha)?;
    spec.check_state("state", x)?;
    if let Some(a) = alpha.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "dissipation coefficient must be non-negative, got {a}"
        )));
    }
    let p: Vec<f64> = dminus.iter().zip(dplus).map(|(m, q)| 0.5 * (m + q)).collect();
    let h = finite(spec.eval(&p, x, &mut spec.workspace()))?;
    let diss: f64 = (0..p.len())
        .map(|i| alpha[i] * 0.5 * (dplus[i] - dminus[i]))
        .sum();
    Ok(h - diss)
}
