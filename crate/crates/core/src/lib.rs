//! Numerical laboratory for the Camassa–Holm family on the circle and its
//! lifts to incompressible Euler flows on cones and warped products.
//!
//! - [`spectral`]: periodic Fourier grids.
//! - [`dynamics`]: CH / CH2 time integration, flow maps, energy.
//! - [`peakon`]: exact peakon ODEs on the line and circle.
//! - [`cone`]: velocity and flow lifts onto the cone, curl and vorticity checks.
//! - [`euler`]: polar incompressible-Euler residuals and the CH2 lift residual.
//! - [`warped`]: warped-product geodesics, Eisenhart lift, curvature.
//! - [`presets`] / [`scenarios`]: named initial conditions and composed runs.

pub mod cone;
pub mod dynamics;
pub mod error;
pub mod euler;
pub mod ode;
pub mod peakon;
pub mod presets;
pub mod scenarios;
pub mod spectral;
pub mod thresholds;
pub mod warped;

pub use error::{Error, Result};
pub use spectral::{Field2D, Grid1D, Grid2D, PeriodicField};
