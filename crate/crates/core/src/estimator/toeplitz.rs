use std::f64::consts::PI;

use num_complex::Complex64;

use crate::channel::{quadratic_term, Carrier};
use crate::error::{Error, Result};
use crate::geometry::RisGeometry;
use crate::training::CovarianceEstimate;
use crate::{CMatrix, CVector};

/// Down-sampled `N_b x N_b` matrix with `N_b = (N_z + 1)(N_y + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzCov {
    pub matrix: CMatrix,
    pub half_y: usize,
    pub half_z: usize,
}

impl ToeplitzCov {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Block `S_i`, `i = z1 - z2`, of size `(N_y + 1) x (N_y + 1)`.
    pub fn block(&self, i: i64) -> Option<CMatrix> {
        let nz = self.half_z as i64;
        if i.abs() > nz {
            return None;
        }
        let w = self.half_y + 1;
        let (z1, z2) = if i >= 0 { (i as usize, 0) } else { (0, (-i) as usize) };
        Some(self.matrix.view((z1 * w, z2 * w), (w, w)).into_owned())
    }
}

/// Reads `R[p, q]` at antisymmetric element pairs `p = -q`.
pub fn build_toeplitz(cov: &CovarianceEstimate, geom: &RisGeometry) -> Result<ToeplitzCov> {
    build_from_matrix(&cov.matrix, geom)
}

pub(crate) fn build_from_matrix(r: &CMatrix, geom: &RisGeometry) -> Result<ToeplitzCov> {
    let n_r = geom.num_elements();
    if r.nrows() != n_r || r.ncols() != n_r {
        return Err(Error::Dimension {
            context: "covariance for the Toeplitz stage",
            expected: n_r,
            found: r.nrows(),
        });
    }
    if n_r.is_multiple_of(2) {
        return Err(Error::domain("the Toeplitz stage needs an odd element count"));
    }
    let (ny, nz) = (geom.half_y, geom.half_z);
    let w = geom.cols() as i64;
    let n0 = geom.center_index() as i64;
    let nb = (nz + 1) * (ny + 1);
    let t = CMatrix::from_fn(nb, nb, |a, b| {
        let (z1, y1) = ((a / (ny + 1)) as i64, (a % (ny + 1)) as i64);
        let (z2, y2) = ((b / (ny + 1)) as i64, (b % (ny + 1)) as i64);
        let k = (z1 - z2) * w + (y1 - y2);
        r[((n0 + k) as usize, (n0 - k) as usize)]
    });
    Ok(ToeplitzCov {
        matrix: t,
        half_y: ny,
        half_z: nz,
    })
}

/// `v(ω)[z] = exp(-j 4π Δ z ω / λ)`.
pub fn omega_vector(omega: f64, geom: &RisGeometry, carrier: &Carrier) -> CVector {
    let k = 4.0 * PI * geom.spacing / carrier.wavelength();
    CVector::from_fn(geom.half_z + 1, |z, _| {
        Complex64::from_polar(1.0, -k * z as f64 * omega)
    })
}

/// `s(φ)[y] = exp(+j 4π Δ y φ / λ)`.
pub fn phi_vector(phi: f64, geom: &RisGeometry, carrier: &Carrier) -> CVector {
    let k = 4.0 * PI * geom.spacing / carrier.wavelength();
    CVector::from_fn(geom.half_y + 1, |y, _| {
        Complex64::from_polar(1.0, k * y as f64 * phi)
    })
}

/// `b = v(ω) ⊗ s(φ)`.
pub fn decimated_steering(omega: f64, phi: f64, geom: &RisGeometry, carrier: &Carrier) -> CVector {
    omega_vector(omega, geom, carrier).kronecker(&phi_vector(phi, geom, carrier))
}

/// Quadratic phase left in `R[p, q]`, i.e. `Q_p - Q_q`, with grid positions `(m_y, m_z)`.
pub fn quadratic_residual(
    p: (i64, i64),
    q: (i64, i64),
    omega: f64,
    phi: f64,
    d: f64,
    geom: &RisGeometry,
) -> Result<f64> {
    geom.grid_to_index(p.0, p.1)?;
    geom.grid_to_index(q.0, q.1)?;
    let qt = |(my, mz): (i64, i64)| {
        quadratic_term(
            my as f64 * geom.spacing,
            mz as f64 * geom.spacing,
            omega,
            phi,
            d,
        )
    };
    Ok(qt(p) - qt(q))
}
