use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::Carrier;
use crate::cluster::kmeans;
use crate::error::{Error, Result};
use crate::geometry::RisGeometry;
use crate::linalg::{hermitian_eigen, step_grid, unwrap_phase};
use crate::CMatrix;

use super::propagator::Projector;
use super::toeplitz::omega_vector;
use super::{GridConfig, Warning};

/// Sampled objective of the omega search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSpectrum {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub peaks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaSearch {
    /// Cluster centers, strongest first.
    pub estimates: Vec<f64>,
    pub peak_values: Vec<f64>,
    pub spectrum: AngleSpectrum,
    /// Whether the coarse grid covers one full period of the decimated array.
    pub folded: bool,
    pub warnings: Vec<Warning>,
}

/// Ambiguity period of the decimated array, `λ / (2Δ)`, in both omega and phi.
pub fn decimated_period(geom: &RisGeometry, carrier: &Carrier) -> f64 {
    carrier.wavelength() / (2.0 * geom.spacing)
}

/// `Θ(ω) = [v(ω)^H ⊗ I] Π_Q [v(ω) ⊗ I]`.
pub fn theta_matrix(
    proj: &Projector,
    omega: f64,
    geom: &RisGeometry,
    carrier: &Carrier,
) -> Result<CMatrix> {
    let (ny, nz) = (geom.half_y + 1, geom.half_z + 1);
    if proj.dim() != ny * nz {
        return Err(Error::Dimension {
            context: "angle-domain projector",
            expected: ny * nz,
            found: proj.dim(),
        });
    }
    let v = omega_vector(omega, geom, carrier);
    let w = proj.basis();
    let u = proj.sources();
    let mut x = CMatrix::zeros(ny, u);
    for z in 0..nz {
        let cv = v[z].conj();
        x += w.view((z * ny, 0), (ny, u)) * cv;
    }
    let low = &x * proj.gram_inv() * x.adjoint();
    let mut theta = CMatrix::identity(ny, ny) * Complex64::new(nz as f64, 0.0) - low;
    theta = (&theta + theta.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(theta)
}

/// Tikhonov-regularized inverse, used when the smallest eigenvalue drops below
/// `1e-10 tr(Θ) / dim`.
fn regularized_inverse(theta: &CMatrix) -> CMatrix {
    let n = theta.nrows();
    let (vals, vecs) = hermitian_eigen(theta);
    let trace: f64 = vals.iter().sum();
    let eps = 1e-10 * trace.abs() / n as f64;
    let shift = if vals[0] < eps { eps } else { 0.0 };
    let mut scaled = vecs.clone();
    for (c, v) in vals.iter().enumerate() {
        let lam = v.max(0.0) + shift;
        let lam = if lam > 0.0 { lam } else { f64::MIN_POSITIVE };
        scaled.column_mut(c).scale_mut(1.0 / lam);
    }
    scaled * vecs.adjoint()
}

/// `e^H Θ^{-1}(ω) e` with `e` the first unit vector.
pub fn spectrum_value(
    proj: &Projector,
    omega: f64,
    geom: &RisGeometry,
    carrier: &Carrier,
) -> Result<f64> {
    let inv = regularized_inverse(&theta_matrix(proj, omega, geom, carrier)?);
    Ok(inv[(0, 0)].re)
}

/// Search window: the configured sector, or one period centered on it when the
/// sector is wider than the ambiguity period.
fn window(range: [f64; 2], period: f64) -> ([f64; 2], bool) {
    if range[1] - range[0] >= period {
        let c = 0.5 * (range[0] + range[1]);
        ([c - 0.5 * period, c + 0.5 * period], true)
    } else {
        (range, false)
    }
}

fn local_maxima(values: &[f64], periodic: bool) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let left = if i > 0 {
                Some(values[i - 1])
            } else if periodic && n > 1 {
                Some(values[n - 1])
            } else {
                None
            };
            let right = if i + 1 < n {
                Some(values[i + 1])
            } else if periodic && n > 1 {
                Some(values[0])
            } else {
                None
            };
            left.is_none_or(|l| values[i] > l) && right.is_none_or(|r| values[i] >= r)
        })
        .collect()
}

/// Two-layer omega search with k-means merging of the fine-grid candidates.
pub fn omega_search(
    proj: &Projector,
    geom: &RisGeometry,
    carrier: &Carrier,
    grid: &GridConfig,
    u: usize,
) -> Result<OmegaSearch> {
    let period = decimated_period(geom, carrier);
    let ([lo, hi], folded) = window(grid.omega_range, period);
    let coarse = if folded {
        let mut g = step_grid(lo, hi, grid.coarse_step)?;
        if g.len() > 1 && (hi - g[g.len() - 1]) < 0.5 * grid.coarse_step {
            g.pop();
        }
        g
    } else {
        step_grid(lo, hi, grid.coarse_step)?
    };
    let values = coarse
        .iter()
        .map(|&w| spectrum_value(proj, w, geom, carrier))
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    let mut maxima = local_maxima(&values, folded);
    maxima.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = maxima.iter().copied().take(u).collect();
    if picked.len() < u {
        warnings.push(Warning::UnderResolved {
            stage: "omega search".into(),
            found: picked.len(),
            expected: u,
        });
        let mut rest: Vec<usize> = (0..coarse.len()).filter(|i| !picked.contains(i)).collect();
        rest.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        picked.extend(rest.into_iter().take(u - picked.len()));
    }

    let half = (grid.coarse_step / grid.fine_step).round() as i64;
    let mut points: Vec<Vec<f64>> = Vec::new();
    for &i in &picked {
        let c = coarse[i];
        let mut fine: Vec<(f64, f64)> = (-half..=half)
            .map(|j| {
                let w = c + j as f64 * grid.fine_step;
                spectrum_value(proj, w, geom, carrier).map(|v| (w, v))
            })
            .collect::<Result<Vec<_>>>()?;
        fine.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
        points.extend(
            fine.iter()
                .take(grid.candidates_per_source)
                .map(|(w, _)| vec![*w]),
        );
    }

    let centers: Vec<f64> = match kmeans(&points, u, &grid.kmeans()) {
        Some(c) => c.centers.into_iter().map(|c| c[0]).collect(),
        None => points.iter().map(|p| p[0]).take(u).collect(),
    };
    let mut scored = centers
        .into_iter()
        .map(|w| spectrum_value(proj, w, geom, carrier).map(|v| (w, v)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));

    Ok(OmegaSearch {
        estimates: scored.iter().map(|s| s.0).collect(),
        peak_values: scored.iter().map(|s| s.1).collect(),
        spectrum: AngleSpectrum {
            grid: coarse.clone(),
            values,
            peaks: picked.iter().map(|&i| coarse[i]).collect(),
        },
        folded,
        warnings,
    })
}

/// LS slope of the unwrapped phases of `s = Θ^{-1} e / (e^H Θ^{-1} e)`.
pub fn phi_recover(
    omega: f64,
    proj: &Projector,
    geom: &RisGeometry,
    carrier: &Carrier,
) -> Result<f64> {
    let inv = regularized_inverse(&theta_matrix(proj, omega, geom, carrier)?);
    let norm = inv[(0, 0)].re;
    let s: Vec<Complex64> = inv.column(0).iter().map(|x| x / norm).collect();
    phi_from_phases(&s, geom, carrier)
}

pub(crate) fn phi_from_phases(s: &[Complex64], geom: &RisGeometry, carrier: &Carrier) -> Result<f64> {
    let q = unwrap_phase(&s.iter().map(|x| x.arg()).collect::<Vec<_>>());
    let k = 4.0 * PI * geom.spacing / carrier.wavelength();
    let (mut num, mut den) = (0.0, 0.0);
    for (y, qy) in q.iter().enumerate() {
        let p = k * y as f64;
        num += p * (qy - q[0]);
        den += p * p;
    }
    let phi = if den > 0.0 { num / den } else { 0.0 };
    if phi.abs() > 1.0 {
        return Err(Error::InfeasibleAngles { omega: f64::NAN, phi });
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{steering_exact, steering_near};
    use crate::estimator::propagator::propagator;
    use crate::estimator::toeplitz::{build_from_matrix, phi_vector};
    use crate::geometry::Vec3;

    fn setup() -> (RisGeometry, Carrier, GridConfig) {
        let g = RisGeometry::new(Vec3::new(0.0, 1.0, 2.5), 10, 5, 3.33e-3).unwrap();
        let grid = GridConfig {
            omega_range: [-0.5, 0.5],
            phi_range: [-0.5, 0.5],
            ..GridConfig::default()
        };
        (g, Carrier::new(90e9).unwrap(), grid)
    }

    fn projector(g: &RisGeometry, c: &Carrier, srcs: &[(f64, f64, f64)], scale: f64) -> Projector {
        let mut r = CMatrix::zeros(g.num_elements(), g.num_elements());
        for &(om, ph, d) in srcs {
            let a = steering_near(om, ph, d, g, c).unwrap().entries;
            r += &a * a.adjoint() * Complex64::new(scale, 0.0);
        }
        propagator(&build_from_matrix(&r, g).unwrap(), srcs.len()).unwrap()
    }

    fn folded_err(a: f64, b: f64, p: f64) -> f64 {
        let d = (a - b) / p;
        (d - d.round()).abs() * p
    }

    #[test]
    fn single_source_omega_within_fine_step() {
        let (g, c, grid) = setup();
        let p = decimated_period(&g, &c);
        let pq = projector(&g, &c, &[(0.3, 0.1, 1.2)], 1.0);
        let res = omega_search(&pq, &g, &c, &grid, 1).unwrap();
        assert!(res.folded);
        assert!(folded_err(res.estimates[0], 0.3, p) <= grid.fine_step);
        assert!(res.warnings.is_empty());
    }

    #[test]
    fn two_sources_resolved() {
        let (g, c, grid) = setup();
        let p = decimated_period(&g, &c);
        // Estimates are reported modulo the decimated-array period; alias
        // selection happens later against the full array.
        let srcs = [(0.5, 0.1, 1.0), (-0.5, -0.2, 2.0)];
        let pq = projector(&g, &c, &srcs, 1.0);
        let res = omega_search(&pq, &g, &c, &grid, 2).unwrap();
        for (om, _, _) in srcs {
            let best = res
                .estimates
                .iter()
                .map(|e| folded_err(*e, om, p))
                .fold(f64::INFINITY, f64::min);
            assert!(best <= grid.fine_step, "omega {om}: {:?}", res.estimates);
        }
    }

    #[test]
    fn argmax_ignores_scale() {
        let (g, c, grid) = setup();
        let a = omega_search(&projector(&g, &c, &[(0.2, -0.1, 0.8)], 1.0), &g, &c, &grid, 1).unwrap();
        let b = omega_search(&projector(&g, &c, &[(0.2, -0.1, 0.8)], 1e-12), &g, &c, &grid, 1).unwrap();
        assert!((a.estimates[0] - b.estimates[0]).abs() < 1e-12);
    }

    #[test]
    fn phi_from_exact_linear_phase() {
        let (g, c, _) = setup();
        let s: Vec<Complex64> = phi_vector(0.1, &g, &c).iter().copied().collect();
        assert!((phi_from_phases(&s, &g, &c).unwrap() - 0.1).abs() < 1e-12);
        let flat = vec![Complex64::from_polar(1.0, 0.4); g.half_y + 1];
        assert_eq!(phi_from_phases(&flat, &g, &c).unwrap(), 0.0);
    }

    #[test]
    fn phi_recovered_from_exact_data() {
        let (g, c, _) = setup();
        let ue = g
            .angles_from_position(g.position_from_estimate(0.2, 0.15, 1.5).unwrap())
            .unwrap();
        let a = steering_exact(&ue, &g, &c).entries;
        let r = &a * a.adjoint();
        let pq = propagator(&build_from_matrix(&r, &g).unwrap(), 1).unwrap();
        let phi = phi_recover(ue.omega, &pq, &g, &c).unwrap();
        assert!((phi - ue.phi).abs() < 1e-3, "{phi} vs {}", ue.phi);
    }
}
