//! Simulation and reconstruction of weak measurements of photon polarization.
//!
//! The crate follows a photon's polarization through a weak coupling to a
//! Gaussian pointer, a post-selecting polarizer and a synthetic camera, then
//! reduces the camera frames back to weak values, wavefunctions, Dirac
//! distributions and density matrices.

pub mod calibration;
pub mod cli;
pub mod config;
pub mod detector;
pub mod error;
pub mod pipeline;
pub mod pointer;
pub mod qstate;
pub mod weak;

pub use calibration::{CalibrationConstants, CalibrationRecord, Outcome};
pub use error::{Error, Result};
pub use pipeline::{Experiment, ExperimentConfig, Mode};
pub use qstate::{DensityMatrix, Ket};
