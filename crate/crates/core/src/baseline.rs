//! Far-field benchmark: 2-D spectral MUSIC over (omega, phi) with planar
//! steering, plus ray/plane intersection for 2-D positioning.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::Carrier;
use crate::cluster::kmeans;
use crate::error::{Error, Result};
use crate::estimator::{GridConfig, Warning};
use crate::geometry::{RisGeometry, Vec3};
use crate::linalg::{hermitian_eigen, step_grid};
use crate::training::CovarianceEstimate;
use crate::{CMatrix, CVector};

/// Pseudo-spectrum on the (omega, phi) grid; infeasible cells hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicSpectrum {
    pub omega_grid: Vec<f64>,
    pub phi_grid: Vec<f64>,
    /// Rows follow `omega_grid`, columns `phi_grid`.
    pub values: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MusicResult {
    /// `(omega, phi)` estimates, strongest first.
    pub angles: Vec<(f64, f64)>,
    pub spectrum: MusicSpectrum,
    pub warnings: Vec<Warning>,
}

/// Signal subspace of the covariance arranged for separable steering.
struct Subspace {
    /// Per source, conjugated eigenvector reshaped to `cols x rows` (y by z).
    blocks: Vec<CMatrix>,
    elements: usize,
    ky: Vec<f64>,
    kz: Vec<f64>,
}

impl Subspace {
    fn new(cov: &CovarianceEstimate, u: usize, geom: &RisGeometry, carrier: &Carrier) -> Self {
        let (_, vecs) = hermitian_eigen(&cov.matrix);
        let n = vecs.ncols();
        let (w, h) = (geom.cols(), geom.rows());
        let blocks = (0..u)
            .map(|k| {
                let col: Vec<Complex64> = vecs.column(n - 1 - k).iter().map(|x| x.conj()).collect();
                CMatrix::from_column_slice(w, h, &col)
            })
            .collect();
        let k = carrier.wavenumber() * geom.spacing;
        Self {
            blocks,
            elements: n,
            ky: (0..w).map(|y| k * (y as f64 - geom.half_y as f64)).collect(),
            kz: (0..h).map(|z| k * (z as f64 - geom.half_z as f64)).collect(),
        }
    }

    /// Per-source partial sums over z for a fixed omega, `cols x U`.
    fn fold_omega(&self, omega: f64) -> CMatrix {
        let vz = CVector::from_iterator(
            self.kz.len(),
            self.kz.iter().map(|k| Complex64::from_polar(1.0, -k * omega)),
        );
        let mut f = CMatrix::zeros(self.ky.len(), self.blocks.len());
        for (c, b) in self.blocks.iter().enumerate() {
            f.set_column(c, &(b * &vz));
        }
        f
    }

    fn phi_rows(&self, phis: &[f64]) -> CMatrix {
        CMatrix::from_fn(phis.len(), self.ky.len(), |i, y| {
            Complex64::from_polar(1.0, self.ky[y] * phis[i])
        })
    }

    /// Pseudo-spectrum for one omega over several phi values.
    fn row(&self, omega: f64, phis: &[f64], phi_rows: &CMatrix) -> Vec<f64> {
        let f = self.fold_omega(omega);
        let t = phi_rows * f;
        let n = self.elements as f64;
        phis.iter()
            .enumerate()
            .map(|(i, &phi)| {
                if omega * omega + phi * phi > 1.0 {
                    return 0.0;
                }
                let captured: f64 = t.row(i).iter().map(|x| x.norm_sqr()).sum();
                1.0 / (n - captured).max(n * 1e-12)
            })
            .collect()
    }

    fn value(&self, omega: f64, phi: f64) -> f64 {
        self.row(omega, &[phi], &self.phi_rows(&[phi]))[0]
    }
}

fn local_maxima_2d(v: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let (r, c) = v.shape();
    let mut out = Vec::new();
    for i in 0..r {
        for j in 0..c {
            let x = v[(i, j)];
            if x <= 0.0 {
                continue;
            }
            let mut is_max = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= r as i64 || b >= c as i64 {
                        continue;
                    }
                    let y = v[(a as usize, b as usize)];
                    let earlier = (di, dj) < (0, 0);
                    if (earlier && y >= x) || (!earlier && y > x) {
                        is_max = false;
                    }
                }
            }
            if is_max {
                out.push((i, j));
            }
        }
    }
    out
}

/// Whether two angle pairs coincide up to the full-array ambiguity period.
fn is_alias(a: (f64, f64), b: (f64, f64), period: f64, tol: f64) -> bool {
    let close = |x: f64, y: f64| {
        let d = (x - y) / period;
        (d - d.round()).abs() * period <= tol
    };
    close(a.0, b.0) && close(a.1, b.1)
}

/// 2-D MUSIC with the same two-layer grid and candidate clustering as the
/// near-field omega search.
pub fn music_2d(
    cov: &CovarianceEstimate,
    u: usize,
    geom: &RisGeometry,
    carrier: &Carrier,
    grid: &GridConfig,
) -> Result<MusicResult> {
    let n = geom.num_elements();
    if cov.dim() != n {
        return Err(Error::Dimension {
            context: "covariance for MUSIC",
            expected: n,
            found: cov.dim(),
        });
    }
    if u >= n {
        return Err(Error::domain(format!(
            "MUSIC needs fewer sources ({u}) than elements ({n})"
        )));
    }
    let omega_grid = step_grid(grid.omega_range[0], grid.omega_range[1], grid.coarse_step)?;
    let phi_grid = step_grid(grid.phi_range[0], grid.phi_range[1], grid.coarse_step)?;
    if u == 0 {
        return Ok(MusicResult {
            angles: Vec::new(),
            spectrum: MusicSpectrum {
                values: DMatrix::zeros(omega_grid.len(), phi_grid.len()),
                omega_grid,
                phi_grid,
            },
            warnings: Vec::new(),
        });
    }
    let sub = Subspace::new(cov, u, geom, carrier);
    let rows = sub.phi_rows(&phi_grid);
    let mut values = DMatrix::zeros(omega_grid.len(), phi_grid.len());
    for (i, &w) in omega_grid.iter().enumerate() {
        for (j, v) in sub.row(w, &phi_grid, &rows).into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }

    let period = carrier.wavelength() / geom.spacing;
    let mut maxima = local_maxima_2d(&values);
    maxima.sort_by(|a, b| values[*b].total_cmp(&values[*a]).then(a.cmp(b)));
    let mut picked: Vec<(f64, f64)> = Vec::new();
    for (i, j) in maxima {
        let cand = (omega_grid[i], phi_grid[j]);
        if picked
            .iter()
            .any(|p| is_alias(*p, cand, period, 1.5 * grid.coarse_step))
        {
            continue;
        }
        picked.push(cand);
        if picked.len() == u {
            break;
        }
    }
    let mut warnings = Vec::new();
    if picked.len() < u {
        warnings.push(Warning::UnderResolved {
            stage: "music".into(),
            found: picked.len(),
            expected: u,
        });
        let mut rest: Vec<(usize, usize)> = (0..omega_grid.len())
            .flat_map(|i| (0..phi_grid.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| values[(i, j)] > 0.0 && !picked.contains(&(omega_grid[i], phi_grid[j])))
            .collect();
        rest.sort_by(|a, b| values[*b].total_cmp(&values[*a]).then(a.cmp(b)));
        picked.extend(
            rest.into_iter()
                .take(u - picked.len())
                .map(|(i, j)| (omega_grid[i], phi_grid[j])),
        );
    }

    let half = (grid.coarse_step / grid.fine_step).round() as i64;
    let offsets: Vec<f64> = (-half..=half).map(|k| k as f64 * grid.fine_step).collect();
    let mut points: Vec<Vec<f64>> = Vec::new();
    for &(w0, p0) in &picked {
        let phis: Vec<f64> = offsets.iter().map(|o| p0 + o).collect();
        let rows = sub.phi_rows(&phis);
        let mut fine: Vec<(f64, f64, f64)> = Vec::new();
        for o in &offsets {
            let w = w0 + o;
            for (j, v) in sub.row(w, &phis, &rows).into_iter().enumerate() {
                if v > 0.0 {
                    fine.push((w, phis[j], v));
                }
            }
        }
        fine.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.total_cmp(&b.0)).then(a.1.total_cmp(&b.1)));
        points.extend(
            fine.iter()
                .take(grid.candidates_per_source)
                .map(|p| vec![p.0, p.1]),
        );
    }
    let centers: Vec<(f64, f64)> = match kmeans(&points, u, &grid.kmeans()) {
        Some(c) => c.centers.into_iter().map(|c| (c[0], c[1])).collect(),
        None => picked.clone(),
    };
    let mut scored: Vec<((f64, f64), f64)> = centers
        .into_iter()
        .map(|a| (a, sub.value(a.0, a.1)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));

    Ok(MusicResult {
        angles: scored.into_iter().map(|s| s.0).collect(),
        spectrum: MusicSpectrum {
            omega_grid,
            phi_grid,
            values,
        },
        warnings,
    })
}

/// Intersects the ray from the RIS center along `(omega, phi)` with the plane `z = plane_z`.
pub fn ff_localize_2d(omega: f64, phi: f64, geom: &RisGeometry, plane_z: f64) -> Result<Vec3> {
    let c2 = 1.0 - omega * omega - phi * phi;
    if !(c2 >= 0.0) {
        return Err(Error::InfeasibleAngles { omega, phi });
    }
    let t = (geom.center.z - plane_z) / omega;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NoIntersection { omega });
    }
    Ok(geom.center + Vec3::new(c2.sqrt(), phi, -omega) * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{steering_exact, steering_far};
    use crate::training::sample_covariance;

    fn setup() -> (RisGeometry, Carrier, GridConfig) {
        (
            RisGeometry::new(Vec3::new(0.0, 1.0, 2.5), 20, 5, 3.33e-3).unwrap(),
            Carrier::new(90e9).unwrap(),
            GridConfig {
                omega_range: [-0.5, 0.5],
                phi_range: [-0.5, 0.5],
                ..GridConfig::default()
            },
        )
    }

    fn cov_from(g: &RisGeometry, c: &Carrier, pts: &[(f64, f64, f64)]) -> CovarianceEstimate {
        let cols: Vec<CVector> = pts
            .iter()
            .map(|&(om, ph, d)| {
                let ue = g.angles_from_position(g.position_from_estimate(om, ph, d).unwrap()).unwrap();
                steering_exact(&ue, g, c).entries
            })
            .collect();
        let tau = 4;
        let snaps: Vec<CVector> = (0..tau)
            .map(|t| {
                let mut s = CVector::zeros(g.num_elements());
                for (k, a) in cols.iter().enumerate() {
                    let x = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (t * k) as f64 / tau as f64);
                    s += a * x;
                }
                s
            })
            .collect();
        sample_covariance(&snaps).unwrap()
    }

    #[test]
    fn far_source_within_fine_step() {
        let (g, c, grid) = setup();
        let rf = g.fraunhofer_distance(c.wavelength()).unwrap();
        let cov = cov_from(&g, &c, &[(0.21, -0.33, 100.0 * rf)]);
        let res = music_2d(&cov, 1, &g, &c, &grid).unwrap();
        let (w, p) = res.angles[0];
        assert!((w - 0.21).abs() <= grid.fine_step, "{w}");
        assert!((p + 0.33).abs() <= grid.fine_step, "{p}");
        assert!(res.spectrum.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn separable_evaluation_matches_direct() {
        let (g, c, _) = setup();
        let cov = cov_from(&g, &c, &[(0.1, 0.2, 1.0), (-0.3, 0.05, 2.5)]);
        let sub = Subspace::new(&cov, 2, &g, &c);
        let (_, vecs) = hermitian_eigen(&cov.matrix);
        let n = vecs.ncols();
        let es = vecs.columns(n - 2, 2).into_owned();
        let a = steering_far(0.17, -0.08, &g, &c).unwrap().entries;
        let direct = 1.0 / (a.norm_squared() - es.ad_mul(&a).norm_squared());
        assert!((sub.value(0.17, -0.08) / direct - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spectrum_peak_ignores_scale() {
        let (g, c, grid) = setup();
        let cov = cov_from(&g, &c, &[(0.3, 0.1, 50.0)]);
        let a = music_2d(&cov, 1, &g, &c, &grid).unwrap();
        let b = music_2d(&cov.scaled(1e-8), 1, &g, &c, &grid).unwrap();
        assert_eq!(a.angles, b.angles);
        assert!(music_2d(&cov, g.num_elements(), &g, &c, &grid).is_err());
    }

    #[test]
    fn plane_intersection() {
        let (g, _, _) = setup();
        let truth = Vec3::new(1.2, 1.4, 0.0);
        let ue = g.angles_from_position(truth).unwrap();
        let p = ff_localize_2d(ue.omega, ue.phi, &g, 0.0).unwrap();
        assert!(p.distance(&truth) < 1e-12);
        assert!(matches!(
            ff_localize_2d(0.0, 0.2, &g, 0.0),
            Err(Error::NoIntersection { .. })
        ));
        assert!(matches!(
            ff_localize_2d(-1e-9, 0.2, &g, 0.0),
            Err(Error::NoIntersection { .. })
        ));
        assert!(ff_localize_2d(0.9, 0.9, &g, 0.0).is_err());
    }
}
