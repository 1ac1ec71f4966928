//! Simulation and estimation for near-field RIS-aided sub-THz uplink localization.
//!
//! The crate synthesizes exact spherical-wave channels between UEs, a planar
//! RIS and a multi-antenna AP, recovers the RIS-side covariance through a DFT
//! training schedule, and runs two estimators on it: a near-field joint
//! localization and channel-estimation pipeline ([`estimator::localize`]) and
//! a far-field 2-D MUSIC benchmark ([`baseline::music_2d`]). The [`harness`]
//! module drives Monte-Carlo trials, sweeps and report I/O.

pub mod baseline;
pub mod channel;
pub mod cluster;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod training;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub use error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
