//! Equilibria, phase transition and hydrodynamic closure of a kinetic swarming
//! model with alignment, noise and a radial confining potential.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coefficients;
pub mod config;
pub mod error;
pub mod gci;
pub mod io;
pub mod particles;
pub mod partition;
pub mod phase;
pub mod potential;
pub mod quadrature;

pub use error::{Error, Result};
pub use partition::{EquilibriumSpec, QuadratureRule};
pub use potential::{BuiltinPotential, RadialPotential};
