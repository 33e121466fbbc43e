//! Numerical Finsler geometry in three dimensions.
//!
//! The crate evaluates the metric, connection and curvature tensors of a
//! Finsler structure `F(x, y)` at a supporting element, builds the
//! spin–curvature couplings that govern spinning light rays, and integrates
//! geodesic, Fermat and spinning-ray trajectories through optical media.
//!
//! * [`jets`] — exact truncated Taylor arithmetic supplying every partial
//!   derivative of `F` the pipeline needs.
//! * [`finsler`] — fundamental tensor, Cartan tensor, spray, Chern and Cartan
//!   connection curvatures.
//! * [`media`] — expression parser and a catalog of anisotropic media.
//! * [`spinoptics`] — spin tensor, couplings `Δ`, `Σ`, the ray generator and
//!   a brute-force kernel oracle.
//! * [`dynamics`] — ray models, Runge–Kutta integrators, shift measurement.

pub mod dynamics;
pub mod error;
pub mod finsler;
pub mod jets;
pub mod media;
pub mod rng;
pub mod spinoptics;
pub mod tensor;

pub use error::{Error, Result};
