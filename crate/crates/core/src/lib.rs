//! Imaging the trajectory of a moving point source from multi-frequency
//! far-field data measured at one or a few observation directions.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`forward`] synthesizes far-field samples w^∞(x̂, k_n) for a trajectory.
//! 2. [`spectral`] assembles the Toeplitz far-field matrix and the eigensystem
//!    of its positive part F# = |Re F| + |Im F|.
//! 3. [`indicator`] evaluates the Picard series of the test vectors φ_y and
//!    the reciprocal indicator W(y).
//! 4. [`imaging`] samples W on search grids and compares against the analytic
//!    strips and Θ-domains of [`trajectory`].

pub mod cli;
pub mod config;
pub mod error;
pub mod forward;
pub mod imaging;
pub mod indicator;
mod quadrature;
pub mod spectral;
pub mod trajectory;

pub use error::{Error, Result};
