use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{AntennaGains, Carrier};
use crate::error::{Error, Result};
use crate::estimator::GridConfig;
use crate::geometry::{ApGeometry, RisGeometry, UeGroundTruth, Vec3};

/// How UE positions are drawn for each trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    /// The same positions in every trial.
    Fixed { positions: Vec<Vec3> },
    /// Uniform in an axis-aligned box; a degenerate `z` interval gives a floor plane.
    Region {
        x: [f64; 2],
        y: [f64; 2],
        z: [f64; 2],
    },
    /// UE `k` at a distance drawn from `radii[k]` (meters from the RIS center),
    /// on the plane `z = plane_z`, within `±azimuth_deg` of the RIS normal.
    /// UEs beyond the listed rings reuse the last ring pushed out 1 m per extra UE.
    Rings {
        radii: Vec<[f64; 2]>,
        azimuth_deg: f64,
        plane_z: f64,
    },
}

impl Placement {
    /// Known UE plane, when all UEs share one.
    pub fn plane_z(&self) -> Option<f64> {
        match self {
            Placement::Fixed { positions } => {
                let z0 = positions.first()?.z;
                positions.iter().all(|p| p.z == z0).then_some(z0)
            }
            Placement::Region { z, .. } => (z[0] == z[1]).then_some(z[0]),
            Placement::Rings { plane_z, .. } => Some(*plane_z),
        }
    }

    fn ring(&self, k: usize) -> Option<[f64; 2]> {
        let Placement::Rings { radii, .. } = self else {
            return None;
        };
        let last = radii.len().checked_sub(1)?;
        let r = radii[k.min(last)];
        let push = k.saturating_sub(last) as f64;
        Some([r[0] + push, r[1] + push])
    }

    fn validate(&self, ris: &RisGeometry, ues: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self {
            Placement::Fixed { positions } => {
                if positions.len() != ues {
                    return bad(format!(
                        "fixed placement lists {} positions for {ues} UEs",
                        positions.len()
                    ));
                }
                for p in positions {
                    ris.angles_from_position(*p)
                        .map_err(|e| Error::Config(format!("fixed UE position: {e}")))?;
                }
            }
            Placement::Region { x, y, z } => {
                for r in [x, y, z] {
                    if !(r[0] <= r[1] && r[0].is_finite() && r[1].is_finite()) {
                        return bad(format!("region bounds {r:?} are not an interval"));
                    }
                }
                if x[0] <= ris.center.x {
                    return bad("region must lie in front of the RIS (x > x_R)".into());
                }
            }
            Placement::Rings {
                radii,
                azimuth_deg,
                plane_z,
            } => {
                if radii.is_empty() {
                    return bad("ring placement needs at least one ring".into());
                }
                if !(*azimuth_deg >= 0.0 && *azimuth_deg < 90.0) {
                    return bad(format!("azimuth half-width {azimuth_deg} must lie in [0, 90)"));
                }
                let dz = (plane_z - ris.center.z).abs();
                for k in 0..ues.max(radii.len()) {
                    let r = self.ring(k).expect("rings present");
                    if !(r[0] <= r[1] && r[0] > dz) {
                        return bad(format!(
                            "ring {r:?} must be an interval beyond the plane offset {dz}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Draws UE `k`'s position.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, ris: &RisGeometry, rng: &mut R) -> Vec3 {
        let uniform = |r: [f64; 2], rng: &mut R| {
            if r[0] == r[1] {
                r[0]
            } else {
                rng.random_range(r[0]..=r[1])
            }
        };
        match self {
            Placement::Fixed { positions } => positions[k],
            Placement::Region { x, y, z } => {
                let px = uniform(*x, rng);
                let py = uniform(*y, rng);
                let pz = uniform(*z, rng);
                Vec3::new(px, py, pz)
            }
            Placement::Rings {
                azimuth_deg,
                plane_z,
                ..
            } => {
                let r = self.ring(k).expect("rings present");
                let d = uniform(r, rng);
                let az = azimuth_deg.to_radians();
                let a = uniform([-az, az], rng);
                let dz = plane_z - ris.center.z;
                let h = (d * d - dz * dz).sqrt();
                ris.center + Vec3::new(h * a.cos(), h * a.sin(), dz)
            }
        }
    }
}

/// One simulated deployment and the estimator settings applied to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub carrier_hz: f64,
    pub ap: ApGeometry,
    pub ris: RisGeometry,
    pub placement: Placement,
    pub ues: usize,
    pub tx_power_dbm: f64,
    pub gains: AntennaGains,
    /// Per-antenna noise power.
    pub noise_dbm: f64,
    /// Number of RIS phase vectors; `None` uses one per element.
    pub schedule_len: Option<usize>,
    /// Pilot slots, one covariance snapshot each.
    pub pilot_len: usize,
    pub grid: GridConfig,
    pub trials: usize,
    pub seed: u64,
    /// Reject a rank-deficient training matrix instead of using its pseudoinverse.
    pub strict: bool,
    /// Subtract the known LS noise covariance before estimation.
    pub subtract_noise_bias: bool,
    /// Minimum separation of drawn UEs in the down-sampled omega domain
    /// (modulo its alias period). Zero disables the check.
    pub min_separation: f64,
}

impl ScenarioConfig {
    /// Full-size deployment: 11 x 101 RIS, 25-antenna AP, 90 GHz, UEs on the floor.
    pub fn full_size() -> Self {
        Self {
            carrier_hz: 90e9,
            ap: ApGeometry {
                position: Vec3::new(1.3, 0.0, 2.7),
                elements: 25,
                spacing: 2e-3,
                axis: Vec3::new(1.0, 0.0, 0.0),
            },
            ris: RisGeometry {
                center: Vec3::new(0.0, 1.0, 2.5),
                half_y: 50,
                half_z: 5,
                spacing: 3.33e-3,
            },
            placement: Placement::Region {
                x: [0.2, 5.2],
                y: [-1.5, 3.5],
                z: [0.0, 0.0],
            },
            ues: 2,
            tx_power_dbm: 27.0,
            gains: AntennaGains {
                tx_dbi: 40.0,
                rx_dbi: 50.0,
            },
            noise_dbm: -120.0,
            schedule_len: Some(150),
            pilot_len: 20,
            grid: GridConfig::default(),
            trials: 200,
            seed: 0x0005_eed0,
            strict: false,
            subtract_noise_bias: false,
            min_separation: 0.0,
        }
    }

    /// Small profile: 11 x 41 panel, full DFT schedule, UEs near 1 m and 3 m
    /// on a plane below the RIS, 100 trials.
    pub fn desk() -> Self {
        Self::full_size().desk_scaled()
    }

    /// Shrinks panel, trial count and search sector to desk size, keeping the
    /// radio parameters.
    pub fn desk_scaled(mut self) -> Self {
        self.ris.half_y = 20;
        self.ris.half_z = 5;
        self.schedule_len = None;
        self.trials = self.trials.min(100);
        self.noise_dbm = DESK_NOISE_DBM;
        self.placement = Placement::Rings {
            radii: vec![[0.9, 1.2], [2.6, 3.4]],
            azimuth_deg: 30.0,
            plane_z: 2.1,
        };
        self.grid.omega_range = [-0.5, 0.5];
        self.grid.phi_range = [-0.5, 0.5];
        self.grid.d_max = Some(5.0);
        self.min_separation = 0.02;
        self.strict = true;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Format {
                path: path.to_path_buf(),
                message: m,
            },
            other => other,
        })
    }

    pub fn carrier(&self) -> Result<Carrier> {
        Carrier::new(self.carrier_hz)
    }

    pub fn schedule_len(&self) -> usize {
        self.schedule_len.unwrap_or(self.ris.num_elements())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let cfg = |e: Error| Error::Config(e.to_string());
        self.carrier().map_err(cfg)?;
        self.ap.validate().map_err(cfg)?;
        self.ris.validate().map_err(cfg)?;
        self.grid.validate()?;
        if self.ues == 0 {
            return bad("at least one UE is required".into());
        }
        if self.pilot_len < self.ues {
            return bad(format!(
                "{} pilot slots cannot carry {} orthogonal UEs",
                self.pilot_len, self.ues
            ));
        }
        let nb = (self.ris.half_y + 1) * (self.ris.half_z + 1);
        if self.ues >= nb {
            return bad(format!(
                "{} UEs exceed the {nb}-element down-sampled array",
                self.ues
            ));
        }
        for (name, v) in [
            ("tx_power_dbm", self.tx_power_dbm),
            ("noise_dbm", self.noise_dbm),
            ("gains.tx_dbi", self.gains.tx_dbi),
            ("gains.rx_dbi", self.gains.rx_dbi),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        let n_r = self.ris.num_elements();
        let s = self.schedule_len();
        if s == 0 || s > n_r {
            return bad(format!("schedule length {s} must lie in [1, {n_r}]"));
        }
        if self.strict && s * self.ap.elements < n_r {
            return bad(format!(
                "strict mode needs S * N_A >= N_R, got {s} * {} < {n_r}",
                self.ap.elements
            ));
        }
        if self.trials == 0 {
            return bad("trial count must be positive".into());
        }
        if !(self.min_separation >= 0.0) {
            return bad("min_separation must be nonnegative".into());
        }
        self.placement.validate(&self.ris, self.ues)
    }

    /// Draws all UE positions for one trial, rejecting draws closer than
    /// `min_separation` in the folded omega domain.
    pub fn sample_ues<R: Rng + ?Sized>(
        &self,
        period: f64,
        rng: &mut R,
    ) -> Result<Vec<UeGroundTruth>> {
        const MAX_DRAWS: usize = 10_000;
        for _ in 0..MAX_DRAWS {
            let ues = (0..self.ues)
                .map(|k| {
                    let p = self.placement.sample(k, &self.ris, rng);
                    self.ris.angles_from_position(p)
                })
                .collect::<Result<Vec<_>>>()?;
            if matches!(self.placement, Placement::Fixed { .. }) || separated(&ues, period, self.min_separation) {
                return Ok(ues);
            }
        }
        Err(Error::Config(format!(
            "no UE draw met min_separation {} in {MAX_DRAWS} attempts",
            self.min_separation
        )))
    }
}

fn separated(ues: &[UeGroundTruth], period: f64, min: f64) -> bool {
    if min == 0.0 {
        return true;
    }
    ues.iter().enumerate().all(|(i, a)| {
        ues[i + 1..].iter().all(|b| {
            let d = (a.omega - b.omega) / period;
            (d - d.round()).abs() * period >= min
        })
    })
}

/// Per-antenna noise of the desk profile. With -120 dBm and the full antenna
/// gains, the LS-recovered snapshots sit near 100 dB SNR and the error floor is
/// set by the Fresnel model mismatch, so transmit power has no visible effect.
/// At this level the far UE at 7 dBm is about 20 dB above the noise after LS
/// combining, which makes the estimators noise-limited at low power.
pub const DESK_NOISE_DBM: f64 = -40.0;
