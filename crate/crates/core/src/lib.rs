//! Numerical laboratory for the damped Klein–Gordon equation
//! `u_tt − Δu + b(t)u_t + m(t)u = 0` with scale-invariant (non-effective)
//! dissipation and mass.

pub mod asymptotic;
pub mod coeffs;
pub mod diagonalize;
pub mod error;
pub mod estimates;
pub mod jet;
pub mod linalg;
pub mod modal;
pub mod ode;
pub mod panels;
pub mod quad;
pub mod solver;
pub mod zones;

pub use error::{Error, Result};
