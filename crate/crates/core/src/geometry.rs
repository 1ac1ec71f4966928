//! Coordinates, array layouts and the (omega, phi, distance) parameterization
//! of a UE relative to a planar RIS lying parallel to the YOZ plane.
//!
//! Element `m` of the RIS sits at grid position `(m_y, m_z)` with
//! `m = m_z (2 N_y + 1) + m_y`. Storage order (vector/matrix indices) is
//! `n = m + N_0` where `N_0 = (N_R - 1) / 2`, i.e. z-major then y.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point or displacement in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Uniform planar RIS of `(2 half_z + 1) x (2 half_y + 1)` elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RisGeometry {
    pub center: Vec3,
    pub half_y: usize,
    pub half_z: usize,
    /// Element spacing in meters.
    pub spacing: f64,
}

impl RisGeometry {
    pub fn new(center: Vec3, half_y: usize, half_z: usize, spacing: f64) -> Result<Self> {
        let geom = Self {
            center,
            half_y,
            half_z,
            spacing,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::domain(format!(
                "RIS spacing must be positive and finite, got {}",
                self.spacing
            )));
        }
        if !self.center.is_finite() {
            return Err(Error::domain("RIS center must be finite"));
        }
        Ok(())
    }

    /// Elements along Y, `2 N_y + 1`.
    pub fn cols(&self) -> usize {
        2 * self.half_y + 1
    }

    /// Elements along Z, `2 N_z + 1`.
    pub fn rows(&self) -> usize {
        2 * self.half_z + 1
    }

    pub fn num_elements(&self) -> usize {
        self.rows() * self.cols()
    }

    /// Storage index of the center element.
    pub fn center_index(&self) -> usize {
        (self.num_elements() - 1) / 2
    }

    pub fn max_index(&self) -> i64 {
        self.center_index() as i64
    }

    pub fn grid_to_index(&self, m_y: i64, m_z: i64) -> Result<i64> {
        if m_y.unsigned_abs() as usize > self.half_y || m_z.unsigned_abs() as usize > self.half_z {
            return Err(Error::domain(format!(
                "grid position ({m_y}, {m_z}) outside a panel with half counts ({}, {})",
                self.half_y, self.half_z
            )));
        }
        Ok(m_z * self.cols() as i64 + m_y)
    }

    pub fn index_to_grid(&self, m: i64) -> Result<(i64, i64)> {
        if m.abs() > self.max_index() {
            return Err(Error::domain(format!(
                "element index {m} outside [-{0}, {0}]",
                self.max_index()
            )));
        }
        Ok(self.storage_to_grid((m + self.max_index()) as usize))
    }

    pub fn storage_index(&self, m: i64) -> Result<usize> {
        self.index_to_grid(m)?;
        Ok((m + self.max_index()) as usize)
    }

    /// Grid position `(m_y, m_z)` of storage slot `n`.
    pub fn storage_to_grid(&self, n: usize) -> (i64, i64) {
        let w = self.cols();
        let m_z = (n / w) as i64 - self.half_z as i64;
        let m_y = (n % w) as i64 - self.half_y as i64;
        (m_y, m_z)
    }

    /// Metric offsets `(m_y Δ, m_z Δ)` of every element in storage order.
    pub fn offsets(&self) -> Vec<(f64, f64)> {
        (0..self.num_elements())
            .map(|n| {
                let (m_y, m_z) = self.storage_to_grid(n);
                (m_y as f64 * self.spacing, m_z as f64 * self.spacing)
            })
            .collect()
    }

    pub fn element_position(&self, m: i64) -> Result<Vec3> {
        let (m_y, m_z) = self.index_to_grid(m)?;
        Ok(self.center
            + Vec3::new(
                0.0,
                m_y as f64 * self.spacing,
                m_z as f64 * self.spacing,
            ))
    }

    /// Panel half-diagonal L.
    pub fn aperture(&self) -> f64 {
        let ly = self.half_y as f64 * self.spacing;
        let lz = self.half_z as f64 * self.spacing;
        ly.hypot(lz)
    }

    /// Fraunhofer distance `2 L^2 / λ`.
    pub fn fraunhofer_distance(&self, wavelength: f64) -> Result<f64> {
        check_wavelength(wavelength)?;
        Ok(2.0 * self.aperture().powi(2) / wavelength)
    }

    /// Inner Fresnel boundary `0.62 sqrt(L^3 / λ)`.
    pub fn fresnel_lower_bound(&self, wavelength: f64) -> Result<f64> {
        check_wavelength(wavelength)?;
        Ok(0.62 * (self.aperture().powi(3) / wavelength).sqrt())
    }

    pub fn classify_region(&self, d: f64, wavelength: f64) -> Result<FieldRegion> {
        if !(d > 0.0) {
            return Err(Error::domain(format!("distance must be positive, got {d}")));
        }
        let upper = self.fraunhofer_distance(wavelength)?;
        let lower = self.fresnel_lower_bound(wavelength)?;
        Ok(if d >= upper {
            FieldRegion::FarField
        } else if d >= lower {
            FieldRegion::Fresnel
        } else {
            FieldRegion::Reactive
        })
    }

    /// Exact distance from element `m` to the UE, in the angular form.
    pub fn exact_element_distance(&self, ue: &UeGroundTruth, m: i64) -> Result<f64> {
        let (m_y, m_z) = self.index_to_grid(m)?;
        Ok(exact_distance(
            m_y as f64 * self.spacing,
            m_z as f64 * self.spacing,
            ue.omega,
            ue.phi,
            ue.distance,
        ))
    }

    pub fn angles_from_position(&self, ue_pos: Vec3) -> Result<UeGroundTruth> {
        let rel = ue_pos - self.center;
        if !rel.is_finite() {
            return Err(Error::domain("UE position must be finite"));
        }
        if !(rel.x > 0.0) {
            return Err(Error::domain(format!(
                "UE at x = {} is not in front of the RIS plane x = {}",
                ue_pos.x, self.center.x
            )));
        }
        let d = rel.norm();
        Ok(UeGroundTruth {
            position: ue_pos,
            distance: d,
            omega: -rel.z / d,
            phi: rel.y / d,
        })
    }

    pub fn position_from_estimate(&self, omega: f64, phi: f64, d: f64) -> Result<Vec3> {
        let c2 = 1.0 - omega * omega - phi * phi;
        if !(c2 >= 0.0) {
            return Err(Error::InfeasibleAngles { omega, phi });
        }
        if !(d > 0.0) {
            return Err(Error::domain(format!("distance must be positive, got {d}")));
        }
        Ok(self.center + Vec3::new(d * c2.sqrt(), phi * d, -omega * d))
    }
}

fn check_wavelength(wavelength: f64) -> Result<()> {
    if wavelength > 0.0 && wavelength.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "wavelength must be positive, got {wavelength}"
        )))
    }
}

/// `d^m` from offsets `(y, z) = (m_y Δ, m_z Δ)` and the UE parameters.
pub fn exact_distance(y: f64, z: f64, omega: f64, phi: f64, d: f64) -> f64 {
    (y * y + z * z + d * d - 2.0 * d * y * phi + 2.0 * d * z * omega).sqrt()
}

/// Uniform linear AP array centered on `position`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApGeometry {
    pub position: Vec3,
    pub elements: usize,
    pub spacing: f64,
    pub axis: Vec3,
}

impl ApGeometry {
    pub fn new(position: Vec3, elements: usize, spacing: f64, axis: Vec3) -> Result<Self> {
        let ap = Self {
            position,
            elements,
            spacing,
            axis,
        };
        ap.validate()?;
        Ok(ap)
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements == 0 {
            return Err(Error::domain("AP needs at least one antenna"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::domain(format!(
                "AP spacing must be positive, got {}",
                self.spacing
            )));
        }
        if (self.axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "AP axis must have unit norm, got {}",
                self.axis.norm()
            )));
        }
        Ok(())
    }

    pub fn element_position(&self, k: usize) -> Vec3 {
        let offset = k as f64 - (self.elements as f64 - 1.0) / 2.0;
        self.position + self.axis * (offset * self.spacing)
    }
}

/// UE position with its angular parameterization relative to the RIS center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeGroundTruth {
    pub position: Vec3,
    /// Distance to the RIS center element.
    pub distance: f64,
    pub omega: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldRegion {
    Reactive,
    Fresnel,
    FarField,
}
