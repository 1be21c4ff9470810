//! Entanglement between a static cavity mode and the modes of a harmonically
//! shaken cavity, through the Bogoliubov maps of the dynamical Casimir effect.
//!
//! `cavity` holds spectra and couplings, `bogoliubov` the coefficient
//! solvers, `gaussian` the covariance algebra and `scenarios` the end-to-end
//! regimes.

pub mod bogoliubov;
pub mod cavity;
pub mod error;
pub mod gaussian;
pub mod scenarios;
pub mod special;

pub use error::{Error, Result};
