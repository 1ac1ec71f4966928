use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, hpd_inverse};
use crate::training::CovarianceEstimate;
use crate::{CMatrix, CVector};

use super::toeplitz::ToeplitzCov;

/// Relative eigenvalue floor for the leading-partition Gram matrix.
const DEGENERACY_TOL: f64 = 1e-13;

/// Orthogonal projector onto the complement of the estimated source subspace.
///
/// With the propagator `P` from `P^H X_1 = X_2`, the sources span
/// `W = [I_U; P^H]` and `Π = I - W (W^H W)^{-1} W^H`, the projector onto the
/// range of `Q = [P; -I]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    basis: CMatrix,
    gram_inv: CMatrix,
    sources: usize,
}

impl Projector {
    fn from_partitions(x: &CMatrix, u: usize, stage: &'static str) -> Result<Self> {
        let n = x.nrows();
        if u == 0 || u >= n {
            return Err(Error::domain(format!(
                "{stage}: source count {u} must lie in [1, {})",
                n
            )));
        }
        let x1 = x.rows(0, u);
        let x2 = x.rows(u, n - u);
        let g1 = hermitian_part(&(x1 * x1.adjoint()));
        let g1_inv = hpd_inverse(&g1, DEGENERACY_TOL).ok_or(Error::DegenerateSources { stage })?;
        // P = (X_1 X_1^H)^{-1} X_1 X_2^H, U x (n - U).
        let p = g1_inv * (x1 * x2.adjoint());
        let mut basis = CMatrix::zeros(n, u);
        basis.view_mut((0, 0), (u, u)).fill_with_identity();
        basis.view_mut((u, 0), (n - u, u)).copy_from(&p.adjoint());
        let gram = hermitian_part(&basis.ad_mul(&basis));
        let gram_inv = hpd_inverse(&gram, 1e-15).ok_or(Error::DegenerateSources { stage })?;
        Ok(Self {
            basis,
            gram_inv,
            sources: u,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    /// Source-subspace basis `[I_U; P^H]`.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// `(W^H W)^{-1}`.
    pub fn gram_inv(&self) -> &CMatrix {
        &self.gram_inv
    }

    /// The propagator `P`.
    pub fn propagator(&self) -> CMatrix {
        let u = self.sources;
        self.basis.rows(u, self.dim() - u).adjoint()
    }

    pub fn dense(&self) -> CMatrix {
        let n = self.dim();
        let low = &self.basis * &self.gram_inv * self.basis.adjoint();
        hermitian_part(&(CMatrix::identity(n, n) - low))
    }

    pub fn apply(&self, a: &CVector) -> CVector {
        let c = self.basis.ad_mul(a);
        a - &self.basis * (&self.gram_inv * c)
    }

    /// `a^H Π a`.
    pub fn quadratic(&self, a: &CVector) -> f64 {
        let c = self.basis.ad_mul(a);
        let inner: Complex64 = c.dotc(&(&self.gram_inv * &c));
        (a.norm_squared() - inner.re).max(0.0)
    }
}

/// Angle-domain projector `Π_Q` from the Toeplitz matrix.
pub fn propagator(t: &ToeplitzCov, u: usize) -> Result<Projector> {
    Projector::from_partitions(&t.matrix, u, "propagator")
}

/// Full-array projector `Π_p` used by the distance search.
pub fn distance_projector(cov: &CovarianceEstimate, u: usize) -> Result<Projector> {
    Projector::from_partitions(&cov.matrix, u, "distance projector")
}
