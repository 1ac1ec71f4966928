use crate::channel::{steering_near, Carrier};
use crate::error::{Error, Result, StageExt};
use crate::geometry::RisGeometry;
use crate::training::{CovarianceEstimate, PilotBook, StackedChannel};
use crate::CVector;

use super::angles::{decimated_period, omega_search, phi_recover};
use super::distance::{distance_search, DistanceSearch};
use super::gains::omp_gains;
use super::propagator::{distance_projector, propagator};
use super::toeplitz::build_from_matrix;
use super::{GridConfig, StageResiduals, UEEstimate};

/// Everything the estimator needs besides the data.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorContext<'a> {
    pub geom: &'a RisGeometry,
    pub carrier: &'a Carrier,
    pub grid: &'a GridConfig,
    pub d_range: [f64; 2],
    pub channel: &'a StackedChannel,
    pub pilots: &'a PilotBook,
    /// Transmit power of each UE in watts.
    pub powers: &'a [f64],
}

/// Values `x + k p` inside `range`, or the single one nearest to it.
pub(crate) fn aliases(x: f64, period: f64, range: [f64; 2], tol: f64) -> Vec<f64> {
    let [lo, hi] = range;
    let k0 = ((lo - x) / period).floor() as i64 - 1;
    let k1 = ((hi - x) / period).ceil() as i64 + 1;
    let inside: Vec<f64> = (k0..=k1)
        .map(|k| x + k as f64 * period)
        .filter(|v| *v >= lo - tol && *v <= hi + tol)
        .collect();
    if !inside.is_empty() {
        return inside;
    }
    let gap = |v: f64| (lo - v).max(v - hi).max(0.0);
    let best = (k0..=k1)
        .map(|k| x + k as f64 * period)
        .min_by(|a, b| gap(*a).total_cmp(&gap(*b)))
        .unwrap_or(x);
    vec![best]
}

/// Full pipeline: Toeplitz folding, omega search, phi recovery, alias
/// selection with the distance search, position recovery and OMP gains.
pub fn localize(
    cov: &CovarianceEstimate,
    slots: &[CVector],
    ctx: &EstimatorContext<'_>,
    u: usize,
) -> Result<Vec<UEEstimate>> {
    if u == 0 {
        return Ok(Vec::new());
    }
    let geom = ctx.geom;
    let nb = (geom.half_y + 1) * (geom.half_z + 1);
    if u >= nb {
        return Err(Error::domain(format!(
            "{u} sources cannot be resolved with a {nb}-element down-sampled array"
        )));
    }
    if ctx.powers.len() != u {
        return Err(Error::Dimension {
            context: "UE transmit powers",
            expected: u,
            found: ctx.powers.len(),
        });
    }
    let r = cov.debiased();
    let t = build_from_matrix(&r, geom).stage("toeplitz")?;
    let pq = propagator(&t, u).stage("propagator")?;
    let search = omega_search(&pq, geom, ctx.carrier, ctx.grid, u).stage("omega search")?;
    let full = CovarianceEstimate {
        matrix: r,
        snapshots: cov.snapshots,
        noise_bias: None,
    };
    let pp = distance_projector(&full, u).stage("distance projector")?;

    let period = decimated_period(geom, ctx.carrier);
    let tol = ctx.grid.fine_step;
    let mut picks: Vec<(f64, f64, DistanceSearch, f64)> = Vec::with_capacity(u);
    for (k, &w) in search.estimates.iter().enumerate() {
        let phi = phi_recover(w, &pq, geom, ctx.carrier).stage("phi recovery")?;
        let mut best: Option<(f64, f64, DistanceSearch)> = None;
        for om in aliases(w, period, ctx.grid.omega_range, tol) {
            for ph in aliases(phi, period, ctx.grid.phi_range, tol) {
                if om * om + ph * ph > 1.0 {
                    continue;
                }
                let ds = distance_search(om, ph, &pp, ctx.d_range, ctx.grid, geom, ctx.carrier)
                    .stage("distance search")?;
                if best.as_ref().is_none_or(|b| ds.objective < b.2.objective) {
                    best = Some((om, ph, ds));
                }
            }
        }
        let (om, ph, ds) = best
            .ok_or(Error::InfeasibleAngles { omega: w, phi })
            .stage("alias selection")?;
        picks.push((om, ph, ds, search.peak_values[k]));
    }

    let steering = picks
        .iter()
        .map(|(om, ph, ds, _)| steering_near(*om, *ph, ds.distance, geom, ctx.carrier).map(|s| s.entries))
        .collect::<Result<Vec<_>>>()
        .stage("gain estimation")?;
    let distances: Vec<f64> = picks.iter().map(|p| p.2.distance).collect();
    let gains = omp_gains(slots, &steering, &distances, ctx.channel, ctx.pilots, ctx.powers)
        .stage("gain estimation")?;

    picks
        .into_iter()
        .zip(gains)
        .map(|((om, ph, ds, peak), gain)| {
            let position = geom
                .position_from_estimate(om, ph, ds.distance)
                .stage("location recovery")?;
            let mut warnings = search.warnings.clone();
            warnings.extend(ds.warnings.iter().cloned());
            Ok(UEEstimate {
                omega: om,
                phi: ph,
                distance: ds.distance,
                position,
                gain,
                residuals: StageResiduals {
                    omega_peak: peak,
                    distance_objective: ds.objective,
                    distance_contrast: ds.contrast,
                },
                warnings,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alias_enumeration() {
        let p = 0.5;
        let mut a = aliases(0.1, p, [-0.5, 0.5], 1e-9);
        a.sort_by(f64::total_cmp);
        assert_eq!(a.len(), 2);
        assert!((a[0] + 0.4).abs() < 1e-12 && (a[1] - 0.1).abs() < 1e-12);
        let narrow = aliases(0.24, p, [0.0, 0.2], 1e-9);
        assert_eq!(narrow.len(), 1);
        assert!((narrow[0] - 0.24).abs() < 1e-12);
    }
}
