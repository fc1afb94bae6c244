//! Hamilton-Jacobi reachability for multi-aircraft conflict resolution.
//!
//! The crate computes backward reach-avoid sets on Cartesian grids by
//! solving a Hamilton-Jacobi variational inequality, checks them against a
//! dynamic-programming oracle, and chains per-aircraft solves into a
//! sequential conflict-resolution sweep.

pub mod dynamics;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod oracle;
pub mod reach_avoid;
pub mod runner;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
