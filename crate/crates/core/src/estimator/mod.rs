//! Near-field joint channel estimation and localization.
//!
//! The covariance is first folded into a down-sampled Toeplitz matrix whose
//! entries pair antisymmetric elements, cancelling the range-dependent phase.
//! Angles come from a propagator-based search on that matrix, distance from a
//! 1-D search against a projector built from the full covariance, and gains
//! from successive residual projection.

mod angles;
mod distance;
mod gains;
mod pipeline;
mod propagator;
mod toeplitz;

use serde::{Deserialize, Serialize};

use crate::cluster::KMeansParams;
use crate::geometry::Vec3;
use num_complex::Complex64;

pub use angles::{
    decimated_period, omega_search, phi_recover, spectrum_value, theta_matrix, AngleSpectrum,
    OmegaSearch,
};
pub use distance::{distance_objective, distance_search, DistanceSearch};
pub use gains::omp_gains;
pub use pipeline::{localize, EstimatorContext};
pub use propagator::{distance_projector, propagator, Projector};
pub use toeplitz::{
    build_toeplitz, decimated_steering, omega_vector, phi_vector, quadratic_residual,
    ToeplitzCov,
};

/// Search grids and angular sector shared by both estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub coarse_step: f64,
    pub fine_step: f64,
    pub distance_points: usize,
    pub refine_points: usize,
    pub d_min: f64,
    /// Upper end of the distance search; `None` uses the Fraunhofer distance.
    pub d_max: Option<f64>,
    /// Admissible omega interval.
    pub omega_range: [f64; 2],
    /// Admissible phi interval.
    pub phi_range: [f64; 2],
    pub candidates_per_source: usize,
    pub kmeans_iterations: usize,
    pub kmeans_restarts: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            coarse_step: 0.01,
            fine_step: 0.0005,
            distance_points: 200,
            refine_points: 20,
            d_min: 0.3,
            d_max: None,
            omega_range: [-1.0, 1.0],
            phi_range: [-1.0, 1.0],
            candidates_per_source: 3,
            kmeans_iterations: 50,
            kmeans_restarts: 5,
        }
    }
}

impl GridConfig {
    pub fn kmeans(&self) -> KMeansParams {
        KMeansParams {
            iterations: self.kmeans_iterations,
            restarts: self.kmeans_restarts,
            ..KMeansParams::default()
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::Config(m.to_string()));
        if !(self.coarse_step > 0.0 && self.fine_step > 0.0 && self.fine_step <= self.coarse_step)
        {
            return bad("grid steps must satisfy 0 < fine_step <= coarse_step");
        }
        if self.distance_points < 2 || self.refine_points < 2 {
            return bad("distance grids need at least two points");
        }
        if !(self.d_min > 0.0) || self.d_max.is_some_and(|d| !(d > self.d_min)) {
            return bad("distance range must satisfy 0 < d_min < d_max");
        }
        for r in [self.omega_range, self.phi_range] {
            if !(r[0] < r[1] && r[0] >= -1.0 && r[1] <= 1.0) {
                return bad("angle ranges must be increasing sub-intervals of [-1, 1]");
            }
        }
        if self.candidates_per_source == 0 {
            return bad("candidates_per_source must be positive");
        }
        Ok(())
    }
}

/// Non-fatal diagnostics attached to an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    UnderResolved {
        stage: String,
        found: usize,
        expected: usize,
    },
    FlatDistanceSpectrum {
        contrast: f64,
    },
    DistanceAtBoundary {
        distance: f64,
    },
    Failed {
        stage: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResiduals {
    /// Spectrum height at the selected omega.
    pub omega_peak: f64,
    /// Projected residual at the selected distance.
    pub distance_objective: f64,
    /// Median over minimum of the distance objective.
    pub distance_contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UEEstimate {
    pub omega: f64,
    pub phi: f64,
    pub distance: f64,
    pub position: Vec3,
    pub gain: Complex64,
    pub residuals: StageResiduals,
    pub warnings: Vec<Warning>,
}
