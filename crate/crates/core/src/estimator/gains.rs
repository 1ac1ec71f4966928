use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::training::{PilotBook, StackedChannel};
use crate::{CMatrix, CVector};

/// Orthogonal matching pursuit over the estimated atoms, nearest UE first,
/// with the per-slot gains averaged over slots.
///
/// `slots[t]` is the stacked observation of pilot slot `t`, `steering[u]` and
/// `distances[u]` the estimated response and range of UE `u`, and `powers[u]`
/// its transmit power in watts. Gains are returned in input order.
pub fn omp_gains(
    slots: &[CVector],
    steering: &[CVector],
    distances: &[f64],
    channel: &StackedChannel,
    pilots: &PilotBook,
    powers: &[f64],
) -> Result<Vec<Complex64>> {
    let u = steering.len();
    if distances.len() != u || powers.len() != u {
        return Err(Error::Dimension {
            context: "gain estimation inputs",
            expected: u,
            found: distances.len().min(powers.len()),
        });
    }
    if u == 0 {
        return Ok(Vec::new());
    }
    if pilots.users() < u || pilots.slots() < slots.len() {
        return Err(Error::Dimension {
            context: "pilot book",
            expected: u,
            found: pilots.users(),
        });
    }
    let mut order: Vec<usize> = (0..u).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));

    let projected: Vec<CVector> = steering.iter().map(|a| channel.apply(a)).collect();
    let energy: Vec<f64> = projected.iter().map(|a| a.norm_squared()).collect();
    if let Some(k) = energy.iter().position(|e| !(*e > 0.0)) {
        return Err(Error::DegenerateSteering { index: k });
    }

    // Gram matrix of the projected atoms; each slot re-fits all selected atoms jointly.
    let gram = CMatrix::from_fn(u, u, |i, j| projected[i].dotc(&projected[j]));
    let mut sums = vec![Complex64::new(0.0, 0.0); u];
    for (t, y) in slots.iter().enumerate() {
        if y.len() != channel.rows() {
            return Err(Error::Dimension {
                context: "stacked observation",
                expected: channel.rows(),
                found: y.len(),
            });
        }
        let corr: Vec<Complex64> = projected.iter().map(|a| a.dotc(y)).collect();
        let mut coef = CVector::zeros(0);
        for step in 1..=u {
            let chosen = &order[..step];
            let sub = CMatrix::from_fn(step, step, |i, j| gram[(chosen[i], chosen[j])]);
            let rhs = CVector::from_fn(step, |i, _| corr[chosen[i]]);
            coef = sub
                .lu()
                .solve(&rhs)
                .filter(|c| c.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
                .ok_or(Error::DegenerateSteering { index: order[step - 1] })?;
        }
        for (i, &k) in order.iter().enumerate() {
            let x = pilots.symbols[(t, k)];
            sums[k] += coef[i] / (powers[k].sqrt() * x);
        }
    }
    let n = slots.len().max(1) as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ris_ap_channel, steering_exact, Carrier};
    use crate::geometry::{ApGeometry, RisGeometry, Vec3};
    use crate::training::{dft_schedule, orthogonal_pilots, stacked_channel};

    struct Fixture {
        g: StackedChannel,
        a: Vec<CVector>,
        d: Vec<f64>,
        pilots: PilotBook,
    }

    fn fixture() -> Fixture {
        let ris = RisGeometry::new(Vec3::new(0.0, 1.0, 2.5), 4, 2, 3.33e-3).unwrap();
        let ap = ApGeometry::new(Vec3::new(1.3, 0.0, 2.7), 5, 2e-3, Vec3::new(1.0, 0.0, 0.0))
            .unwrap();
        let c = Carrier::new(90e9).unwrap();
        let ch = ris_ap_channel(&ap, &ris, &c).unwrap();
        let g = stacked_channel(&ch, &dft_schedule(ris.num_elements(), ris.num_elements()).unwrap())
            .unwrap();
        let mut a = Vec::new();
        let mut d = Vec::new();
        for (om, ph, dist) in [(0.3, 0.1, 2.0), (-0.2, -0.15, 0.8)] {
            let ue = ris
                .angles_from_position(ris.position_from_estimate(om, ph, dist).unwrap())
                .unwrap();
            a.push(steering_exact(&ue, &ris, &c).entries);
            d.push(dist);
        }
        Fixture {
            g,
            a,
            d,
            pilots: orthogonal_pilots(4, 2).unwrap(),
        }
    }

    fn observe(f: &Fixture, gains: &[Complex64], powers: &[f64], users: usize) -> Vec<CVector> {
        (0..f.pilots.slots())
            .map(|t| {
                let mut h = CVector::zeros(f.a[0].len());
                for k in 0..users {
                    h += &f.a[k] * (gains[k] * powers[k].sqrt() * f.pilots.symbols[(t, k)]);
                }
                f.g.apply(&h)
            })
            .collect()
    }

    #[test]
    fn single_ue_gain_is_exact() {
        let f = fixture();
        let truth = [Complex64::new(3e-4, -1e-4)];
        let slots = observe(&f, &truth, &[0.5], 1);
        let est = omp_gains(&slots, &f.a[..1], &f.d[..1], &f.g, &f.pilots, &[0.5]).unwrap();
        assert!((est[0] - truth[0]).norm() <= 1e-9 * truth[0].norm());
    }

    #[test]
    fn two_ues_leave_small_residual() {
        let f = fixture();
        let truth = [Complex64::new(3e-4, -1e-4), Complex64::new(-2e-4, 5e-4)];
        let powers = [0.5, 0.2];
        let slots = observe(&f, &truth, &powers, 2);
        let est = omp_gains(&slots, &f.a, &f.d, &f.g, &f.pilots, &powers).unwrap();
        for (t, y) in slots.iter().enumerate() {
            let mut res = y.clone();
            for k in [1, 0] {
                let ab = f.g.apply(&f.a[k]);
                res -= ab * (powers[k].sqrt() * est[k] * f.pilots.symbols[(t, k)]);
            }
            assert!(res.norm() <= 1e-8 * y.norm());
        }
    }

    #[test]
    fn zero_signal_gives_zero_gains() {
        let f = fixture();
        let slots = vec![CVector::zeros(f.g.rows()); 4];
        let est = omp_gains(&slots, &f.a, &f.d, &f.g, &f.pilots, &[1.0, 1.0]).unwrap();
        assert!(est.iter().all(|g| g.norm() == 0.0));
    }

    #[test]
    fn vanishing_steering_is_rejected() {
        let f = fixture();
        let zero = vec![CVector::zeros(f.a[0].len())];
        let slots = vec![CVector::zeros(f.g.rows()); 4];
        assert!(matches!(
            omp_gains(&slots, &zero, &[1.0], &f.g, &f.pilots, &[1.0]),
            Err(Error::DegenerateSteering { index: 0 })
        ));
    }
}
