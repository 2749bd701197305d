//! Kernelized postural synergies for desk-scale grasping and manipulation.
//!
//! The crate is `no_std` (with `alloc`) and contains only the numerical
//! pipeline. File formats, synthetic scenarios and the command line tool live
//! in the companion `kernsyn` crate.
//!
//! The stages, in execution order:
//!
//! 1. [`synergy`]: principal-component synergy basis of demonstrated hand
//!    postures, projection into and reconstruction from synergy space.
//! 2. [`trajectory`] and [`gmm`]: synergy coefficients resampled over
//!    normalized demonstration time, encoded by a Gaussian mixture and
//!    regressed into a probabilistic reference trajectory.
//! 3. [`kernel`] and [`kmp`]: kernelized movement primitives over the
//!    reference, with via-point adaptation and priority fusion.
//! 4. [`perception`]: RANSAC table removal, Euclidean clustering, linear SVM
//!    labelling and centroid poses mapped into synergy via-points.
//! 5. [`force`]: grasp-matrix contact forces in the synergy subspace,
//!    friction-cone test, motor currents and tactile force correction.
//! 6. [`metrics`] and [`benchmark`]: correlation / RMSE scores and the
//!    kernel comparison harness.
//!
//! All randomness is driven by explicit seeds; every fitted model is
//! immutable and `Send + Sync`.

#![no_std]

extern crate alloc;

pub mod benchmark;
pub mod error;
pub mod force;
pub mod gmm;
pub mod kernel;
pub mod kmp;
pub mod linalg;
pub mod metrics;
pub mod perception;
pub mod synergy;
pub mod trajectory;

#[cfg(feature = "serde")]
mod serde_mat;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
