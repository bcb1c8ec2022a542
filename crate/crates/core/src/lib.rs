//! Numerical workbench for semilinear wave equations with scale-invariant
//! damping and mass: exponents, special functions, test functions, a radial
//! finite-difference solver, blow-up functionals and iteration ledgers.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exponents;
pub mod functionals;
pub mod iteration;
pub mod numerics;
pub mod profile;
pub mod solver;
pub mod specfun;
pub mod testfuncs;
pub mod verify;

pub use error::{Error, Result};
pub use exponents::{ExponentReport, LifespanCase, ModelParams, Regime};
pub use profile::{DataProfile, RadialProfile};
