//! RIS training schedule, pilots, the stacked training channel with its
//! conditioning, least-squares recovery and the sample covariance.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::RisApChannel;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, ONE};
use crate::{CMatrix, CVector};

/// Relative singular-value threshold below which the training matrix is singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-10;

/// RIS phase vectors, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    pub vectors: CMatrix,
}

impl PhaseSchedule {
    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }

    pub fn elements(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vector(&self, s: usize) -> CVector {
        self.vectors.column(s).into_owned()
    }
}

/// First `s` columns of the `n_r`-point DFT matrix.
pub fn dft_schedule(n_r: usize, s: usize) -> Result<PhaseSchedule> {
    if s == 0 || s > n_r {
        return Err(Error::domain(format!(
            "schedule length must lie in [1, {n_r}], got {s}"
        )));
    }
    let vectors = CMatrix::from_fn(n_r, s, |n, col| {
        let k = ((n * col) % n_r) as f64;
        Complex64::from_polar(1.0, -2.0 * PI * k / n_r as f64)
    });
    Ok(PhaseSchedule { vectors })
}

/// Pilot symbols, row `t` holds `x_t` for all UEs.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    pub symbols: CMatrix,
}

impl PilotBook {
    pub fn slots(&self) -> usize {
        self.symbols.nrows()
    }

    pub fn users(&self) -> usize {
        self.symbols.ncols()
    }

    pub fn slot(&self, t: usize) -> Vec<Complex64> {
        self.symbols.row(t).iter().copied().collect()
    }

    /// `(1/τ) Σ_t x_t x_t^H`.
    pub fn sample_correlation(&self) -> CMatrix {
        let x = self.symbols.transpose();
        (&x * x.adjoint()) / Complex64::new(self.slots() as f64, 0.0)
    }
}

/// `x_t[u] = exp(-j 2π t u / τ)`, orthonormal over the `τ` slots.
pub fn orthogonal_pilots(tau: usize, users: usize) -> Result<PilotBook> {
    if tau == 0 || users > tau {
        return Err(Error::domain(format!(
            "pilot length {tau} cannot carry {users} orthogonal sequences"
        )));
    }
    let symbols = CMatrix::from_fn(tau, users, |t, u| {
        let k = ((t * u) % tau) as f64;
        Complex64::from_polar(1.0, -2.0 * PI * k / tau as f64)
    });
    Ok(PilotBook { symbols })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    /// Count of singular values above `SINGULAR_THRESHOLD * sigma_max`.
    pub rank: usize,
    pub columns: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub condition: f64,
}

impl Conditioning {
    pub fn full_rank(&self) -> bool {
        self.rank == self.columns
    }

    pub fn ratio(&self) -> f64 {
        if self.sigma_max > 0.0 {
            self.sigma_min / self.sigma_max
        } else {
            0.0
        }
    }
}

/// `G_RIS = [G diag(e_1); ...; G diag(e_S)]`, kept in factored form.
#[derive(Debug, Clone)]
pub struct StackedChannel {
    pub ap_ris: CMatrix,
    pub schedule: PhaseSchedule,
    pub conditioning: Conditioning,
    /// Truncated `(G_RIS^H G_RIS)^+`.
    gram_pinv: CMatrix,
}

pub fn stacked_channel(channel: &RisApChannel, schedule: &PhaseSchedule) -> Result<StackedChannel> {
    if channel.elements() != schedule.elements() {
        return Err(Error::Dimension {
            context: "phase schedule",
            expected: channel.elements(),
            found: schedule.elements(),
        });
    }
    let mut g = StackedChannel {
        ap_ris: channel.matrix.clone(),
        schedule: schedule.clone(),
        conditioning: Conditioning {
            rank: 0,
            columns: channel.elements(),
            sigma_max: 0.0,
            sigma_min: 0.0,
            condition: f64::INFINITY,
        },
        gram_pinv: CMatrix::zeros(0, 0),
    };
    let n = g.columns();
    // Householder QR keeps the small singular values accurate; the Gram matrix would square them.
    let r = g.dense().qr().r();
    let svd = r.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    sigma.resize(n, 0.0);
    let sigma_max = sigma[0];
    let sigma_min = sigma[n - 1];
    let rank = sigma
        .iter()
        .filter(|&&s| s > SINGULAR_THRESHOLD * sigma_max)
        .count();
    let mut pinv = CMatrix::zeros(n, n);
    for &i in order.iter().take(rank) {
        let v = v_t.row(i).adjoint();
        let w = Complex64::new(1.0 / svd.singular_values[i].powi(2), 0.0);
        pinv.gerc(w, &v, &v, ONE);
    }
    g.gram_pinv = hermitian_part(&pinv);
    g.conditioning = Conditioning {
        rank,
        columns: n,
        sigma_max,
        sigma_min,
        condition: if sigma_min > 0.0 {
            sigma_max / sigma_min
        } else {
            f64::INFINITY
        },
    };
    Ok(g)
}

impl StackedChannel {
    pub fn antennas(&self) -> usize {
        self.ap_ris.nrows()
    }

    pub fn columns(&self) -> usize {
        self.ap_ris.ncols()
    }

    pub fn rows(&self) -> usize {
        self.antennas() * self.schedule.len()
    }

    /// Materialized `N_A S x N_R` matrix.
    pub fn dense(&self) -> CMatrix {
        let na = self.antennas();
        let mut out = CMatrix::zeros(self.rows(), self.columns());
        for s in 0..self.schedule.len() {
            let e = self.schedule.vectors.column(s);
            let mut block = self.ap_ris.clone();
            for (c, mut col) in block.column_iter_mut().enumerate() {
                col *= e[c];
            }
            out.view_mut((s * na, 0), (na, self.columns())).copy_from(&block);
        }
        out
    }

    /// `G_RIS v`.
    pub fn apply(&self, v: &CVector) -> CVector {
        let mut scaled = self.schedule.vectors.clone();
        for (mut row, x) in scaled.row_iter_mut().zip(v.iter()) {
            row *= *x;
        }
        let blocks = &self.ap_ris * scaled;
        CVector::from_column_slice(blocks.as_slice())
    }

    /// `G_RIS^H y`.
    pub fn adjoint_apply(&self, y: &CVector) -> CVector {
        let na = self.antennas();
        let blocks = CMatrix::from_column_slice(na, self.schedule.len(), y.as_slice());
        let back = self.ap_ris.ad_mul(&blocks);
        let weighted = back.component_mul(&self.schedule.vectors.map(|e| e.conj()));
        weighted.column_sum()
    }

    pub fn gram_pinv(&self) -> &CMatrix {
        &self.gram_pinv
    }

    /// `σ² (G_RIS^H G_RIS)^{-1}`, the noise term left in the LS covariance.
    pub fn noise_bias(&self, variance: f64) -> CMatrix {
        &self.gram_pinv * Complex64::new(variance, 0.0)
    }

    fn check_rows(&self, y: &CVector) -> Result<()> {
        if y.len() != self.rows() {
            return Err(Error::Dimension {
                context: "stacked observation",
                expected: self.rows(),
                found: y.len(),
            });
        }
        Ok(())
    }
}

/// Least-squares `(G^H G)^{-1} G^H y`; refuses a rank-deficient training matrix.
pub fn ls_recover(y: &CVector, g: &StackedChannel) -> Result<CVector> {
    if !g.conditioning.full_rank() {
        return Err(Error::Singular {
            sigma_min: g.conditioning.sigma_min,
            ratio: g.conditioning.ratio(),
        });
    }
    ls_recover_truncated(y, g)
}

/// Minimum-norm LS through the truncated pseudoinverse.
pub fn ls_recover_truncated(y: &CVector, g: &StackedChannel) -> Result<CVector> {
    g.check_rows(y)?;
    Ok(&g.gram_pinv * g.adjoint_apply(y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: CMatrix,
    pub snapshots: usize,
    pub noise_bias: Option<CMatrix>,
}

impl CovarianceEstimate {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Covariance with the noise bias removed, when one is attached.
    pub fn debiased(&self) -> CMatrix {
        match &self.noise_bias {
            Some(b) => &self.matrix - b,
            None => self.matrix.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> CovarianceEstimate {
        CovarianceEstimate {
            matrix: &self.matrix * Complex64::new(c, 0.0),
            snapshots: self.snapshots,
            noise_bias: self.noise_bias.as_ref().map(|b| b * Complex64::new(c, 0.0)),
        }
    }
}

/// `(1/τ) Σ_t v_t v_t^H`.
pub fn sample_covariance(recovered: &[CVector]) -> Result<CovarianceEstimate> {
    let first = recovered
        .first()
        .ok_or_else(|| Error::domain("sample covariance needs at least one snapshot"))?;
    let n = first.len();
    let mut v = CMatrix::zeros(n, recovered.len());
    for (t, x) in recovered.iter().enumerate() {
        if x.len() != n {
            return Err(Error::Dimension {
                context: "snapshot",
                expected: n,
                found: x.len(),
            });
        }
        v.set_column(t, x);
    }
    let r = (&v * v.adjoint()) / Complex64::new(recovered.len() as f64, 0.0);
    Ok(CovarianceEstimate {
        matrix: hermitian_part(&r),
        snapshots: recovered.len(),
        noise_bias: None,
    })
}
