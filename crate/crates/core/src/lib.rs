//! Numerical laboratory for the viscous contact wave of the one-dimensional
//! compressible Navier-Stokes free-boundary problem in Lagrangian coordinates.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: gas parameters, the uniform mesh, nodal fields, finite
//!   differences and trapezoid norms.
//! * [`wave`]: the viscous contact wave `(V, U, Θ)` obtained from the nonlinear
//!   diffusion `Θ_t = a (ln Θ)_xx`, its residuals `F`, `G`, and decay checks.
//! * [`kernel`]: the closed-form odd-reflection heat-kernel solution used as a
//!   trusted oracle for the diffusion.
//! * [`solver`]: time integration of the full Lagrangian system with the
//!   temperature and stress boundary conditions.
//! * [`diagnostics`]: perturbation fields, the entropy-type energy, weighted
//!   Poincaré monitoring, oscillation, and log-log decay fits.

pub mod banded;
pub mod diagnostics;
pub mod error;
pub mod kernel;
pub mod model;
pub mod quadrature;
pub mod solver;
pub mod wave;

pub use error::{Error, Result};
