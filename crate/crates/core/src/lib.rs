//! Reconstruction of a metric space from finite interior spectral data.
//!
//! The crate follows the constructive route: interior eigenpairs on a small
//! ball are turned into approximate cut-off functions by a constrained
//! quadratic minimization over wave observations, volumes of slices of the
//! manifold are read off from those cut-offs, admissible distance vectors are
//! enumerated, and a finite metric space is assembled and compared against
//! ground truth on model manifolds.

pub mod chain;
pub mod error;
pub mod harness;
pub mod manifold;
pub mod recon;
pub mod solver;
pub mod spectral;
pub mod volumes;
pub mod wave;

pub use error::{Error, Result};
