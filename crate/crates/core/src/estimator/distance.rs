use crate::channel::{steering_near, Carrier};
use crate::error::{Error, Result};
use crate::geometry::RisGeometry;
use crate::linalg::{linspace, logspace, median};

use super::propagator::Projector;
use super::{GridConfig, Warning};

/// Spectrum contrast (median over minimum) below which the search is unresolved.
pub const MIN_CONTRAST: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSearch {
    pub distance: f64,
    pub objective: f64,
    pub contrast: f64,
    /// Spacing of the refinement grid around the coarse minimum.
    pub refine_step: f64,
    pub warnings: Vec<Warning>,
}

/// `a^H Π_p a / N_R` for the near-field steering vector at distance `d`.
pub fn distance_objective(
    omega: f64,
    phi: f64,
    d: f64,
    proj: &Projector,
    geom: &RisGeometry,
    carrier: &Carrier,
) -> Result<f64> {
    let a = steering_near(omega, phi, d, geom, carrier)?.entries;
    if a.len() != proj.dim() {
        return Err(Error::Dimension {
            context: "full-array projector",
            expected: a.len(),
            found: proj.dim(),
        });
    }
    Ok(proj.quadratic(&a) / a.len() as f64)
}

fn argmin(values: &[f64]) -> usize {
    // First occurrence wins, so ties go to the smaller distance.
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Log-spaced search over `[d_min, d_max]` followed by a linear refinement
/// between the neighbours of the coarse minimum.
pub fn distance_search(
    omega: f64,
    phi: f64,
    proj: &Projector,
    d_range: [f64; 2],
    grid: &GridConfig,
    geom: &RisGeometry,
    carrier: &Carrier,
) -> Result<DistanceSearch> {
    let [lo, hi] = d_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::domain(format!(
            "distance range [{lo}, {hi}] must satisfy 0 < d_min < d_max"
        )));
    }
    let coarse = logspace(lo, hi, grid.distance_points);
    let values = coarse
        .iter()
        .map(|&d| distance_objective(omega, phi, d, proj, geom, carrier))
        .collect::<Result<Vec<_>>>()?;
    let i = argmin(&values);
    let a = coarse[i.saturating_sub(1)];
    let b = coarse[(i + 1).min(coarse.len() - 1)];
    let fine = linspace(a, b, grid.refine_points);
    let fine_values = fine
        .iter()
        .map(|&d| distance_objective(omega, phi, d, proj, geom, carrier))
        .collect::<Result<Vec<_>>>()?;
    let j = argmin(&fine_values);

    let mut warnings = Vec::new();
    let best = fine_values[j];
    let med = median(&values);
    let contrast = if best > 0.0 { med / best } else { f64::INFINITY };
    if !(contrast >= MIN_CONTRAST) {
        warnings.push(Warning::FlatDistanceSpectrum { contrast });
    }
    if i == 0 || i == coarse.len() - 1 {
        warnings.push(Warning::DistanceAtBoundary { distance: fine[j] });
    }
    Ok(DistanceSearch {
        distance: fine[j],
        objective: best,
        contrast,
        refine_step: (b - a) / (grid.refine_points - 1) as f64,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::steering_exact;
    use crate::estimator::propagator::distance_projector;
    use crate::geometry::Vec3;
    use crate::training::sample_covariance;

    fn setup() -> (RisGeometry, Carrier) {
        (
            RisGeometry::new(Vec3::new(0.0, 1.0, 2.5), 20, 5, 3.33e-3).unwrap(),
            Carrier::new(90e9).unwrap(),
        )
    }

    fn projector_for(g: &RisGeometry, c: &Carrier, omega: f64, phi: f64, d: f64, scale: f64) -> (Projector, f64, f64) {
        let ue = g
            .angles_from_position(g.position_from_estimate(omega, phi, d).unwrap())
            .unwrap();
        let a = steering_exact(&ue, g, c).entries * num_complex::Complex64::new(scale, 0.0);
        let cov = sample_covariance(&[a]).unwrap();
        (distance_projector(&cov, 1).unwrap(), ue.omega, ue.phi)
    }

    #[test]
    fn noiseless_distance_within_refinement_step() {
        let (g, c) = setup();
        let (pp, om, ph) = projector_for(&g, &c, 0.25, -0.1, 1.5, 1.0);
        let res = distance_search(om, ph, &pp, [0.3, 2.83], &GridConfig::default(), &g, &c).unwrap();
        assert!((res.distance - 1.5).abs() <= res.refine_step, "{res:?}");
        assert!(res.warnings.is_empty(), "{:?}", res.warnings);
    }

    #[test]
    fn scale_invariant() {
        let (g, c) = setup();
        let grid = GridConfig::default();
        let (p1, om, ph) = projector_for(&g, &c, 0.2, 0.2, 0.9, 1.0);
        let (p2, _, _) = projector_for(&g, &c, 0.2, 0.2, 0.9, 1e-5);
        let a = distance_search(om, ph, &p1, [0.3, 2.83], &grid, &g, &c).unwrap();
        let b = distance_search(om, ph, &p2, [0.3, 2.83], &grid, &g, &c).unwrap();
        assert_eq!(a.distance, b.distance);
    }

    #[test]
    fn beyond_range_is_clipped_and_flagged() {
        let (g, c) = setup();
        let (pp, om, ph) = projector_for(&g, &c, 0.1, 0.1, 2.5, 1.0);
        let res = distance_search(om, ph, &pp, [0.3, 1.0], &GridConfig::default(), &g, &c).unwrap();
        assert!(res.distance <= 1.0 && res.distance > 0.99);
        assert!(res
            .warnings
            .iter()
            .any(|w| matches!(w, Warning::DistanceAtBoundary { .. })));
    }

    #[test]
    fn ties_prefer_smaller_distance() {
        assert_eq!(argmin(&[3.0, 1.0, 1.0, 2.0]), 1);
    }
}
