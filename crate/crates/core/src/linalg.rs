//! Small dense helpers shared by the estimators.

use std::f64::consts::PI;

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{CMatrix, CVector};

pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues in ascending order.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Inverse of a Hermitian positive definite matrix, refusing near-singular input.
pub fn hpd_inverse(a: &CMatrix, rel_tol: f64) -> Option<CMatrix> {
    let (values, vectors) = hermitian_eigen(a);
    let max = values.last().copied().unwrap_or(0.0);
    if values.is_empty() || !(max > 0.0) || values[0] <= rel_tol * max {
        return None;
    }
    let mut scaled = vectors.clone();
    for (c, &v) in values.iter().enumerate() {
        scaled.column_mut(c).scale_mut(1.0 / v);
    }
    Some(hermitian_part(&(scaled * vectors.adjoint())))
}

pub fn relative_frobenius(a: &CMatrix, reference: &CMatrix) -> f64 {
    let denom = reference.norm();
    let diff = (a - reference).norm();
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}

/// Phase sequence made continuous by adding multiples of 2π.
pub fn unwrap_phase(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut prev: Option<f64> = None;
    for &p in phases {
        let q = match prev {
            None => p,
            Some(last) => p - 2.0 * PI * ((p - last) / (2.0 * PI)).round(),
        };
        out.push(q);
        prev = Some(q);
    }
    out
}

/// `n` points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Grid `lo, lo + step, ...` not exceeding `hi` (plus a tolerance for rounding).
pub fn step_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) {
        return Err(Error::domain(format!(
            "invalid grid [{lo}, {hi}] with step {step}"
        )));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn column_vectors(m: &CMatrix) -> Vec<CVector> {
    m.column_iter().map(|c| c.into_owned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unwrap_restores_a_ramp() {
        let truth: Vec<f64> = (0..30).map(|i| 0.9 * i as f64).collect();
        let wrapped: Vec<f64> = truth
            .iter()
            .map(|p| Complex64::from_polar(1.0, *p).arg())
            .collect();
        let un = unwrap_phase(&wrapped);
        for (a, b) in un.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn grids() {
        assert_eq!(step_grid(-1.0, 1.0, 0.01).unwrap().len(), 201);
        assert_eq!(linspace(0.0, 1.0, 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = logspace(0.3, 3.0, 3);
        assert!((g[1] - 0.9f64.sqrt()).abs() < 1e-12);
        assert!(step_grid(0.0, 1.0, 0.0).is_err());
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn eigen_is_sorted_and_reconstructs() {
        let a = CMatrix::from_fn(4, 4, |i, j| Complex64::new((i + j) as f64, i as f64 - j as f64));
        let (vals, vecs) = hermitian_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            4,
            vals.iter().map(|v| Complex64::new(*v, 0.0)),
        ));
        let back = &vecs * d * vecs.adjoint();
        assert!(relative_frobenius(&back, &a) < 1e-12);
    }

    #[test]
    fn hpd_inverse_rejects_singular() {
        let v = CVector::from_element(3, ONE);
        assert!(hpd_inverse(&(&v * v.adjoint()), 1e-12).is_none());
        let a = CMatrix::identity(3, 3) * Complex64::new(2.0, 0.0);
        let inv = hpd_inverse(&a, 1e-12).unwrap();
        assert!((inv[(1, 1)].re - 0.5).abs() < 1e-15);
    }
}
