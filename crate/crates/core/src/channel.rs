//! Steering vectors, the RIS-AP line-of-sight matrix, path attenuation and
//! received-signal synthesis. Ground truth always uses the exact spherical
//! model; the near- and far-field approximations are for estimators.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{exact_distance, ApGeometry, RisGeometry, UeGroundTruth};
use crate::{CMatrix, CVector};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Carrier {
    /// Hz.
    pub frequency: f64,
}

impl Carrier {
    pub fn new(frequency: f64) -> Result<Self> {
        if frequency > 0.0 && frequency.is_finite() {
            Ok(Self { frequency })
        } else {
            Err(Error::domain(format!(
                "carrier frequency must be positive, got {frequency}"
            )))
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SteeringModel {
    Exact,
    NearField,
    FarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: CVector,
    pub model: SteeringModel,
}

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `|<a, b>| / N`, the normalized correlation of two unit-modulus responses.
    pub fn cosine_similarity(&self, other: &SteeringVector) -> f64 {
        self.entries.dotc(&other.entries).norm() / self.len() as f64
    }
}

/// Linear phase term `J_m = m_z Δ ω - m_y Δ φ`.
pub fn linear_term(y: f64, z: f64, omega: f64, phi: f64) -> f64 {
    z * omega - y * phi
}

/// Quadratic phase term `Q_m`.
pub fn quadratic_term(y: f64, z: f64, omega: f64, phi: f64, d: f64) -> f64 {
    let j = linear_term(y, z, omega, phi);
    (z * z + y * y - j * j) / (2.0 * d)
}

/// Element distances `d^m` in storage order under the given model.
pub fn element_distances(
    model: SteeringModel,
    omega: f64,
    phi: f64,
    d: f64,
    geom: &RisGeometry,
) -> Vec<f64> {
    geom.offsets()
        .into_iter()
        .map(|(y, z)| match model {
            SteeringModel::Exact => exact_distance(y, z, omega, phi, d),
            SteeringModel::NearField => {
                d + linear_term(y, z, omega, phi) + quadratic_term(y, z, omega, phi, d)
            }
            SteeringModel::FarField => d + linear_term(y, z, omega, phi),
        })
        .collect()
}

fn check_angles(omega: f64, phi: f64) -> Result<()> {
    if omega * omega + phi * phi <= 1.0 {
        Ok(())
    } else {
        Err(Error::InfeasibleAngles { omega, phi })
    }
}

fn phase_vector(k: f64, phases: impl Iterator<Item = f64>) -> CVector {
    DVector::from_vec(phases.map(|p| Complex64::from_polar(1.0, -k * p)).collect())
}

pub fn steering_exact(ue: &UeGroundTruth, geom: &RisGeometry, carrier: &Carrier) -> SteeringVector {
    let d0 = ue.distance;
    let entries = phase_vector(
        carrier.wavenumber(),
        geom.offsets()
            .into_iter()
            .map(|(y, z)| exact_distance(y, z, ue.omega, ue.phi, d0) - d0),
    );
    SteeringVector {
        entries,
        model: SteeringModel::Exact,
    }
}

pub fn steering_far(
    omega: f64,
    phi: f64,
    geom: &RisGeometry,
    carrier: &Carrier,
) -> Result<SteeringVector> {
    check_angles(omega, phi)?;
    let entries = phase_vector(
        carrier.wavenumber(),
        geom.offsets()
            .into_iter()
            .map(|(y, z)| linear_term(y, z, omega, phi)),
    );
    Ok(SteeringVector {
        entries,
        model: SteeringModel::FarField,
    })
}

pub fn steering_near(
    omega: f64,
    phi: f64,
    d: f64,
    geom: &RisGeometry,
    carrier: &Carrier,
) -> Result<SteeringVector> {
    check_angles(omega, phi)?;
    if !(d > 0.0) {
        return Err(Error::domain(format!("distance must be positive, got {d}")));
    }
    let entries = phase_vector(
        carrier.wavenumber(),
        geom.offsets().into_iter().map(|(y, z)| {
            linear_term(y, z, omega, phi) + quadratic_term(y, z, omega, phi, d)
        }),
    );
    Ok(SteeringVector {
        entries,
        model: SteeringModel::NearField,
    })
}

/// Line-of-sight matrix between the AP array and the RIS.
#[derive(Debug, Clone, PartialEq)]
pub struct RisApChannel {
    /// `N_A x N_R`, entry `(m, n) = exp(+j 2π r_{m,n} / λ)`.
    pub matrix: CMatrix,
    pub path_lengths: DMatrix<f64>,
}

impl RisApChannel {
    pub fn antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn elements(&self) -> usize {
        self.matrix.ncols()
    }
}

pub fn ris_ap_channel(
    ap: &ApGeometry,
    ris: &RisGeometry,
    carrier: &Carrier,
) -> Result<RisApChannel> {
    let n_r = ris.num_elements();
    let k = carrier.wavenumber();
    let ris_pos: Vec<_> = (0..n_r)
        .map(|n| {
            let (m_y, m_z) = ris.storage_to_grid(n);
            ris.center
                + crate::geometry::Vec3::new(
                    0.0,
                    m_y as f64 * ris.spacing,
                    m_z as f64 * ris.spacing,
                )
        })
        .collect();
    let mut lengths = DMatrix::<f64>::zeros(ap.elements, n_r);
    for a in 0..ap.elements {
        let p = ap.element_position(a);
        for (n, q) in ris_pos.iter().enumerate() {
            let r = p.distance(q);
            if !(r > 0.0) {
                return Err(Error::domain(format!(
                    "AP element {a} coincides with RIS element {n}"
                )));
            }
            lengths[(a, n)] = r;
        }
    }
    let matrix = lengths.map(|r| Complex64::from_polar(1.0, k * r));
    Ok(RisApChannel {
        matrix,
        path_lengths: lengths,
    })
}

/// Antenna gains in dBi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaGains {
    pub tx_dbi: f64,
    pub rx_dbi: f64,
}

impl AntennaGains {
    pub const UNITY: AntennaGains = AntennaGains {
        tx_dbi: 0.0,
        rx_dbi: 0.0,
    };
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Free-space magnitude `sqrt(G_t G_r) λ / (4π d)` with a uniform random phase.
pub fn attenuation_model<R: Rng + ?Sized>(
    d: f64,
    carrier: &Carrier,
    gains: &AntennaGains,
    rng: &mut R,
) -> Result<Complex64> {
    if !(d > 0.0) {
        return Err(Error::domain(format!("distance must be positive, got {d}")));
    }
    let mag = attenuation_magnitude(d, carrier, gains);
    let phase = rng.random_range(0.0..2.0 * PI);
    Ok(Complex64::from_polar(mag, phase))
}

pub fn attenuation_magnitude(d: f64, carrier: &Carrier, gains: &AntennaGains) -> f64 {
    (db_to_linear(gains.tx_dbi) * db_to_linear(gains.rx_dbi)).sqrt() * carrier.wavelength()
        / (4.0 * PI * d)
}

/// Per-UE link coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attenuation {
    /// UE-RIS coefficient `g_{R,u}`.
    pub ris_ue: Complex64,
    /// RIS-AP coefficient `g_A`, common to all UEs.
    pub ap_ris: Complex64,
    /// Transmit power in watts.
    pub power: f64,
}

impl Attenuation {
    pub fn cascaded(&self) -> Complex64 {
        self.ap_ris * self.ris_ue
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-antenna complex noise variance in watts.
    pub variance: f64,
}

impl NoiseModel {
    pub fn new(variance: f64) -> Result<Self> {
        if variance >= 0.0 && variance.is_finite() {
            Ok(Self { variance })
        } else {
            Err(Error::domain(format!(
                "noise variance must be nonnegative, got {variance}"
            )))
        }
    }

    /// Circularly symmetric Gaussian vector with covariance `σ² I`.
    pub fn sample<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> CVector {
        if self.variance == 0.0 {
            return CVector::zeros(len);
        }
        let s = (self.variance / 2.0).sqrt();
        CVector::from_fn(len, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re * s, im * s)
        })
    }
}

/// One transmitting UE as seen by the synthesizer.
#[derive(Debug, Clone)]
pub struct Source {
    pub steering: SteeringVector,
    pub attenuation: Attenuation,
}

/// Noise-free RIS-side signal `sum_u sqrt(P_u) g_u a_u x_u`.
pub fn impinging(sources: &[Source], pilots: &[Complex64], n_r: usize) -> Result<CVector> {
    if pilots.len() != sources.len() {
        return Err(Error::Dimension {
            context: "pilot symbols",
            expected: sources.len(),
            found: pilots.len(),
        });
    }
    let mut h = CVector::zeros(n_r);
    for (src, &x) in sources.iter().zip(pilots) {
        if src.steering.len() != n_r {
            return Err(Error::Dimension {
                context: "steering vector",
                expected: n_r,
                found: src.steering.len(),
            });
        }
        let c = src.attenuation.cascaded() * src.attenuation.power.sqrt() * x;
        h.axpy(c, &src.steering.entries, Complex64::new(1.0, 0.0));
    }
    Ok(h)
}

/// Received AP snapshot `G diag(e) sum_u sqrt(P_u) g_u a_u x_u + n`.
pub fn synthesize_rx<R: Rng + ?Sized>(
    sources: &[Source],
    pilots: &[Complex64],
    phase_vector: &CVector,
    channel: &RisApChannel,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<CVector> {
    let n_r = channel.elements();
    if phase_vector.len() != n_r {
        return Err(Error::Dimension {
            context: "RIS phase vector",
            expected: n_r,
            found: phase_vector.len(),
        });
    }
    if let Some(i) = phase_vector.iter().position(|e| (e.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::domain(format!(
            "RIS phase entry {i} is not unit modulus"
        )));
    }
    let h = impinging(sources, pilots, n_r)?;
    let reflected = h.component_mul(phase_vector);
    Ok(&channel.matrix * reflected + noise.sample(channel.antennas(), rng))
}
