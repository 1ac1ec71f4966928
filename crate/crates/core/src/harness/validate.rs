use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{element_distances, ris_ap_channel, steering_near, SteeringModel};
use crate::error::Result;
use crate::estimator::{build_toeplitz, decimated_steering, quadratic_residual};
use crate::geometry::exact_distance;
use crate::linalg::relative_frobenius;
use crate::training::{dft_schedule, orthogonal_pilots, stacked_channel, CovarianceEstimate};
use crate::CMatrix;

use super::config::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// Model and estimator invariants evaluated on the configured panel.
pub fn validate(cfg: &ScenarioConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let carrier = cfg.carrier()?;
    let ris = &cfg.ris;
    let lambda = carrier.wavelength();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();

    let rf = ris.fraunhofer_distance(lambda)?;
    let fresnel = ris.fresnel_lower_bound(lambda)?;
    let mut nf_wins = 0usize;
    let draws = 200;
    for _ in 0..draws {
        let d = rng.random_range(fresnel.max(1e-3)..rf);
        let (w, p) = feasible_angles(&mut rng);
        let offsets = ris.offsets();
        let nf = element_distances(SteeringModel::NearField, w, p, d, ris);
        let ff = element_distances(SteeringModel::FarField, w, p, d, ris);
        let (mut en, mut ef) = (0.0, 0.0);
        for (k, &(y, z)) in offsets.iter().enumerate() {
            let ex = exact_distance(y, z, w, p, d);
            en += (ex - nf[k]).abs();
            ef += (ex - ff[k]).abs();
        }
        nf_wins += usize::from(en < ef);
    }
    checks.push(check(
        "second-order distances beat first-order in the Fresnel region",
        nf_wins * 100 >= draws * 99,
        format!("{nf_wins}/{draws} draws"),
    ));

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (w, p) = feasible_angles(&mut rng);
        let d = rng.random_range(0.5..5.0);
        for n in 0..ris.num_elements() {
            let (my, mz) = ris.storage_to_grid(n);
            worst = worst.max(quadratic_residual((my, mz), (-my, -mz), w, p, d, ris)?.abs());
        }
    }
    checks.push(check(
        "antisymmetric pairs cancel the quadratic phase",
        worst <= 1e-12,
        format!("max |Q_p - Q_q| = {worst:e} m"),
    ));

    let mut r = CMatrix::zeros(ris.num_elements(), ris.num_elements());
    let mut want = None::<CMatrix>;
    for _ in 0..2 {
        let (w, p) = feasible_angles(&mut rng);
        let d = rng.random_range(0.5..3.0);
        let g2 = rng.random_range(0.1..1.0);
        let a = steering_near(w, p, d, ris, &carrier)?.entries;
        r += &a * a.adjoint() * Complex64::new(g2, 0.0);
        let b = decimated_steering(w, p, ris, &carrier);
        let bb = &b * b.adjoint() * Complex64::new(g2, 0.0);
        want = Some(match want {
            Some(m) => m + bb,
            None => bb,
        });
    }
    let cov = CovarianceEstimate {
        matrix: r,
        snapshots: 1,
        noise_bias: None,
    };
    let t = build_toeplitz(&cov, ris)?;
    let err = relative_frobenius(&t.matrix, &want.expect("two sources"));
    checks.push(check(
        "noiseless Toeplitz matrix equals the decimated outer products",
        err <= 1e-9,
        format!("relative Frobenius error {err:e}"),
    ));

    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (w, p) = feasible_angles(&mut rng);
        let d = rng.random_range(0.1..20.0);
        let pos = ris.position_from_estimate(w, p, d)?;
        let back = ris.angles_from_position(pos)?;
        let again = ris.position_from_estimate(back.omega, back.phi, back.distance)?;
        worst = worst.max(again.distance(&pos));
    }
    checks.push(check(
        "position and angle maps are inverse",
        worst <= 1e-9,
        format!("max round-trip error {worst:e} m"),
    ));

    let pilots = orthogonal_pilots(cfg.pilot_len, cfg.ues)?;
    let dev = relative_frobenius(
        &pilots.sample_correlation(),
        &CMatrix::identity(cfg.ues, cfg.ues),
    );
    checks.push(check(
        "pilots are orthonormal over the slots",
        dev <= 1e-12,
        format!("deviation {dev:e}"),
    ));

    let ap_ris = ris_ap_channel(&cfg.ap, ris, &carrier)?;
    let g = stacked_channel(&ap_ris, &dft_schedule(ris.num_elements(), cfg.schedule_len())?)?;
    let c = g.conditioning;
    checks.push(check(
        "training matrix has full column rank",
        c.full_rank() || !cfg.strict,
        format!(
            "rank {}/{} (sigma_min/sigma_max = {:e}){}",
            c.rank,
            c.columns,
            c.ratio(),
            if c.full_rank() || cfg.strict { "" } else { ", pseudoinverse in use" }
        ),
    ));

    Ok(ValidationReport { checks })
}

fn feasible_angles<R: Rng>(rng: &mut R) -> (f64, f64) {
    loop {
        let w: f64 = rng.random_range(-0.7..0.7);
        let p: f64 = rng.random_range(-0.7..0.7);
        if w * w + p * p <= 0.9 {
            return (w, p);
        }
    }
}
