//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Reference values come from oracles written here from the raw geometry
//! (Cartesian element positions, direct phase formulas), not from the
//! library's own helpers.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use risloc::channel::{element_distances, steering_far, steering_near, ris_ap_channel, Carrier, SteeringModel};
use risloc::estimator::{build_toeplitz, quadratic_residual};
use risloc::geometry::{RisGeometry, Vec3};
use risloc::harness::{
    self, run_trial, Method, MethodSet, Metric, Placement, Quantity, Scenario, ScenarioConfig,
    SweepAxis,
};
use risloc::training::{dft_schedule, stacked_channel, CovarianceEstimate};
use risloc::{CMatrix, CVector};

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn timed(
    name: &'static str,
    budget_s: f64,
    f: impl FnOnce() -> Result<(bool, String), String>,
) -> Outcome {
    let t0 = Instant::now();
    let r = f();
    let elapsed = t0.elapsed();
    let budget = Duration::from_secs_f64(budget_s);
    let (ok, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
    Outcome {
        name,
        passed: ok && elapsed <= budget,
        detail,
        elapsed,
        budget,
    }
}

// Oracles: element (m_y, m_z) in storage slot n sits at center + (0, m_y Δ, m_z Δ).

fn grid_of(g: &RisGeometry, n: usize) -> (f64, f64) {
    let cols = 2 * g.half_y + 1;
    let my = (n % cols) as f64 - g.half_y as f64;
    let mz = (n / cols) as f64 - g.half_z as f64;
    (my * g.spacing, mz * g.spacing)
}

fn ue_at(g: &RisGeometry, omega: f64, phi: f64, d: f64) -> Vec3 {
    let c = g.center;
    Vec3::new(
        c.x + d * (1.0 - omega * omega - phi * phi).sqrt(),
        c.y + phi * d,
        c.z - omega * d,
    )
}

fn cartesian_distances(g: &RisGeometry, ue: Vec3) -> Vec<f64> {
    (0..g.num_elements())
        .map(|n| {
            let (y, z) = grid_of(g, n);
            let e = Vec3::new(g.center.x, g.center.y + y, g.center.z + z);
            ((ue.x - e.x).powi(2) + (ue.y - e.y).powi(2) + (ue.z - e.z).powi(2)).sqrt()
        })
        .collect()
}

fn exact_response(g: &RisGeometry, ue: Vec3, lambda: f64) -> CVector {
    let d = cartesian_distances(g, ue);
    let d0 = d[(g.num_elements() - 1) / 2];
    let k = 2.0 * PI / lambda;
    CVector::from_fn(d.len(), |n, _| Complex64::from_polar(1.0, -k * (d[n] - d0)))
}

fn similarity(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).norm() / a.len() as f64
}

fn random_angles(rng: &mut ChaCha8Rng, bound: f64) -> (f64, f64) {
    loop {
        let w = rng.random_range(-bound..bound);
        let p = rng.random_range(-bound..bound);
        if w * w + p * p <= bound * bound {
            return (w, p);
        }
    }
}

fn desk_panel() -> RisGeometry {
    ScenarioConfig::desk().ris
}

fn carrier() -> Carrier {
    Carrier::new(90e9).unwrap()
}

fn fraunhofer(g: &RisGeometry, lambda: f64) -> f64 {
    let l = g.spacing * ((g.half_y * g.half_y + g.half_z * g.half_z) as f64).sqrt();
    2.0 * l * l / lambda
}

fn approximation_ordering() -> Result<(bool, String), String> {
    let g = desk_panel();
    let lambda = carrier().wavelength();
    let l = g.spacing * ((g.half_y * g.half_y + g.half_z * g.half_z) as f64).sqrt();
    let lo = 0.62 * (l.powi(3) / lambda).sqrt();
    let hi = fraunhofer(&g, lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 200;
    let mut wins = 0;
    for _ in 0..trials {
        let (w, p) = random_angles(&mut rng, 0.9);
        let d = rng.random_range(lo..hi);
        let exact = cartesian_distances(&g, ue_at(&g, w, p, d));
        let nf = element_distances(SteeringModel::NearField, w, p, d, &g);
        let ff = element_distances(SteeringModel::FarField, w, p, d, &g);
        let en: f64 = exact.iter().zip(&nf).map(|(a, b)| (a - b).abs()).sum();
        let ef: f64 = exact.iter().zip(&ff).map(|(a, b)| (a - b).abs()).sum();
        if en < ef {
            wins += 1;
        }
    }
    Ok((
        wins * 100 >= trials * 99,
        format!("second-order closer in {wins}/{trials} Fresnel-region draws (need >= 99%)"),
    ))
}

fn steering_fidelity() -> Result<(bool, String), String> {
    let g = desk_panel();
    let c = carrier();
    let rf = fraunhofer(&g, c.wavelength());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let points = 16;
    let mut ok = true;
    let mut worst_margin = f64::INFINITY;
    let mut worst_nf_far = f64::INFINITY;
    for i in 0..points {
        let d = 0.5 * (rf / 0.5).powf(i as f64 / (points - 1) as f64);
        let (mut snf, mut sff) = (0.0, 0.0);
        let draws = 40;
        for _ in 0..draws {
            let (w, p) = random_angles(&mut rng, 0.8);
            let ex = exact_response(&g, ue_at(&g, w, p, d), c.wavelength());
            let nf = steering_near(w, p, d, &g, &c).map_err(|e| e.to_string())?.entries;
            let ff = steering_far(w, p, &g, &c).map_err(|e| e.to_string())?.entries;
            snf += similarity(&ex, &nf);
            sff += similarity(&ex, &ff);
        }
        let (snf, sff) = (snf / draws as f64, sff / draws as f64);
        worst_margin = worst_margin.min(snf - sff);
        ok &= snf > sff;
        if d >= rf / 4.0 {
            worst_nf_far = worst_nf_far.min(snf);
            ok &= snf >= 0.99;
        }
    }
    Ok((
        ok,
        format!(
            "min(NF - FF) mean similarity {worst_margin:.4} over {points} distances in [0.5, {rf:.2}] m; \
             min NF similarity beyond R_f/4 = {worst_nf_far:.5}"
        ),
    ))
}

fn fraunhofer_constant() -> Result<(bool, String), String> {
    let cfg = ScenarioConfig::full_size();
    let c = cfg.carrier().map_err(|e| e.to_string())?;
    let rf = cfg.ris.fraunhofer_distance(c.wavelength()).map_err(|e| e.to_string())?;
    let oracle = fraunhofer(&cfg.ris, c.wavelength());
    let rel = (rf - 17.58).abs() / 17.58;
    Ok((
        rel <= 0.10 && (rf - oracle).abs() <= 1e-12 * oracle,
        format!("R_f = {rf:.3} m vs 17.58 m ({:.1}% off)", 100.0 * rel),
    ))
}

fn cancellation_identity() -> Result<(bool, String), String> {
    let g = RisGeometry::new(Vec3::new(0.0, 1.0, 2.5), 4, 2, 3.33e-3).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for _ in 0..50 {
        let (w, p) = random_angles(&mut rng, 0.95);
        let d = rng.random_range(0.2..20.0);
        let quad = |y: f64, z: f64| {
            let j = z * w - y * p;
            (z * z + y * y - j * j) / (2.0 * d)
        };
        for n in 0..g.num_elements() {
            let (y, z) = grid_of(&g, n);
            let my = (y / g.spacing).round() as i64;
            let mz = (z / g.spacing).round() as i64;
            let lib = quadratic_residual((my, mz), (-my, -mz), w, p, d, &g).map_err(|e| e.to_string())?;
            let oracle = quad(y, z) - quad(-y, -z);
            worst = worst.max(lib.abs()).max(oracle.abs());
            pairs += 1;
        }
    }
    Ok((
        worst <= 1e-12,
        format!("max |Q_pq| = {worst:.2e} over {pairs} antisymmetric pairs on a 5x9 panel"),
    ))
}

fn toeplitz_identity() -> Result<(bool, String), String> {
    let g = RisGeometry::new(Vec3::new(0.0, 1.0, 2.5), 7, 3, 3.33e-3).map_err(|e| e.to_string())?;
    let c = carrier();
    let kk = 4.0 * PI * g.spacing / c.wavelength();
    let k = 2.0 * PI / c.wavelength();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = g.num_elements();
        let nb = (g.half_y + 1) * (g.half_z + 1);
        let mut r = CMatrix::zeros(n, n);
        let mut want = CMatrix::zeros(nb, nb);
        for _ in 0..2 {
            let (w, p) = random_angles(&mut rng, 0.9);
            let d = rng.random_range(0.3..3.0);
            let amp: f64 = rng.random_range(0.1..2.0);
            let a = CVector::from_fn(n, |i, _| {
                let (y, z) = grid_of(&g, i);
                let j = z * w - y * p;
                let q = (z * z + y * y - j * j) / (2.0 * d);
                Complex64::from_polar(1.0, -k * (j + q))
            });
            r += &a * a.adjoint() * Complex64::new(amp * amp, 0.0);
            let b = CVector::from_fn(nb, |i, _| {
                let zi = (i / (g.half_y + 1)) as f64;
                let yi = (i % (g.half_y + 1)) as f64;
                Complex64::from_polar(1.0, -kk * zi * w + kk * yi * p)
            });
            want += &b * b.adjoint() * Complex64::new(amp * amp, 0.0);
        }
        let cov = CovarianceEstimate {
            matrix: r,
            snapshots: 1,
            noise_bias: None,
        };
        let t = build_toeplitz(&cov, &g).map_err(|e| e.to_string())?;
        worst = worst.max((&t.matrix - &want).norm() / want.norm());
    }
    Ok((
        worst <= 1e-9,
        format!("max relative Frobenius error {worst:.2e} over 10 two-UE draws on a 7x15 panel"),
    ))
}

fn noiseless_end_to_end() -> Result<(bool, String), String> {
    let mut cfg = ScenarioConfig::desk();
    let (w, p, d) = (0.2, 0.15, 1.5);
    let pos = ue_at(&cfg.ris, w, p, d);
    cfg.ues = 1;
    cfg.noise_dbm = -300.0;
    cfg.trials = 1;
    cfg.placement = Placement::Fixed { positions: vec![pos] };
    let scenario = Scenario::prepare(&cfg).map_err(|e| e.to_string())?;
    let trial = run_trial(&scenario, 0, MethodSet::Nf).map_err(|e| e.to_string())?;
    let rec = &trial.method(Method::Nf).ok_or("no NF result")?.ues[0];
    let est = rec.estimate;
    let truth = rec.truth;
    // Refinement step of the logarithmic distance grid around the true range.
    let [lo, hi] = scenario.d_range;
    let ratio = (hi / lo).powf(1.0 / (cfg.grid.distance_points - 1) as f64);
    let refine = d * (ratio - 1.0 / ratio) / (cfg.grid.refine_points - 1) as f64;
    let loc = est.position.distance(&pos);
    let ew = (est.omega - w).abs();
    let ep = (est.phi - p).abs();
    let ed = (est.distance - d).abs();
    let eg = (est.gain - truth.gain).norm() / truth.gain.norm();
    let checks = [
        loc <= 0.01,
        ew <= cfg.grid.fine_step,
        ep <= cfg.grid.fine_step,
        ed <= refine,
        eg <= 1e-6,
    ];
    Ok((
        checks.iter().all(|c| *c) && rec.valid,
        format!(
            "position {loc:.2e} m (<= 1e-2), omega {ew:.2e} / phi {ep:.2e} (<= {}), \
             distance {ed:.2e} m (<= {refine:.2e}), gain relative {eg:.2e} (<= 1e-6)",
            cfg.grid.fine_step
        ),
    ))
}

fn rank_condition() -> Result<(bool, String), String> {
    let cfg = ScenarioConfig::desk();
    let c = cfg.carrier().map_err(|e| e.to_string())?;
    let n_r = cfg.ris.num_elements();
    let n_a = cfg.ap.elements;
    let ch = ris_ap_channel(&cfg.ap, &cfg.ris, &c).map_err(|e| e.to_string())?;
    let cond = |s: usize| {
        let sched = dft_schedule(n_r, s).map_err(|e| e.to_string())?;
        stacked_channel(&ch, &sched)
            .map(|g| g.conditioning)
            .map_err(|e| e.to_string())
    };
    let s_hi = n_r.div_ceil(n_a) + 1;
    let s_lo = n_r / n_a - 1;
    let hi = cond(s_hi)?;
    let lo = cond(s_lo)?;
    Ok((
        hi.full_rank() && !lo.full_rank(),
        format!(
            "S={s_hi}: rank {}/{n_r} (ratio {:.1e}); S={s_lo}: rank {}/{n_r} flagged={}",
            hi.rank,
            hi.ratio(),
            lo.rank,
            !lo.full_rank()
        ),
    ))
}

fn comparative_rmse() -> Result<(bool, String), String> {
    let cfg = ScenarioConfig::desk();
    let out = harness::run(&cfg, MethodSet::Both).map_err(|e| e.to_string())?;
    let get = |m| out.report.get(None, m, Metric::Sum, Quantity::Location).ok_or("missing row");
    let nf = get(Method::Nf)?;
    let ff = get(Method::Ff)?;
    Ok((
        nf < ff,
        format!(
            "sum location RMSE over {} trials: NF {nf:.4} m, FF {ff:.4} m, margin {:.4} m ({:.1}x)",
            cfg.trials,
            ff - nf,
            ff / nf
        ),
    ))
}

fn power_trend() -> Result<(bool, String), String> {
    let cfg = ScenarioConfig::desk();
    let out = harness::sweep(&cfg, SweepAxis::TxPower, &[7.0, 27.0], MethodSet::Nf)
        .map_err(|e| e.to_string())?;
    let get = |v| {
        out.report
            .get(Some(v), Method::Nf, Metric::Sum, Quantity::Location)
            .ok_or("missing row")
    };
    let low = get(7.0)?;
    let high = get(27.0)?;
    Ok((
        high < low,
        format!("NF sum location RMSE over {} trials: 7 dBm {low:.4} m, 27 dBm {high:.4} m", cfg.trials),
    ))
}

fn roundtrip_geometry() -> Result<(bool, String), String> {
    let g = ScenarioConfig::full_size().ris;
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst: f64 = 0.0;
    let n = 10_000;
    for _ in 0..n {
        let pos = Vec3::new(
            g.center.x + rng.random_range(0.05..10.0),
            g.center.y + rng.random_range(-10.0..10.0),
            g.center.z + rng.random_range(-10.0..10.0),
        );
        let ue = g.angles_from_position(pos).map_err(|e| e.to_string())?;
        let back = g
            .position_from_estimate(ue.omega, ue.phi, ue.distance)
            .map_err(|e| e.to_string())?;
        worst = worst.max(back.distance(&pos));
    }
    Ok((worst <= 1e-9, format!("max round-trip error {worst:.2e} m over {n} UEs")))
}

fn determinism() -> Result<(bool, String), String> {
    let mut cfg = ScenarioConfig::desk();
    cfg.trials = 8;
    let a = harness::run(&cfg, MethodSet::Both).map_err(|e| e.to_string())?;
    let b = harness::run(&cfg, MethodSet::Both).map_err(|e| e.to_string())?;
    let (ca, cb) = (a.report.to_csv_string(), b.report.to_csv_string());
    Ok((
        ca == cb && !a.report.rows.is_empty(),
        format!("{} CSV bytes, identical = {}", ca.len(), ca == cb),
    ))
}

fn main() -> ExitCode {
    let outcomes = vec![
        timed("approximation ordering", 10.0, approximation_ordering),
        timed("steering fidelity", 10.0, steering_fidelity),
        timed("Fraunhofer constant", 1.0, fraunhofer_constant),
        timed("cancellation identity", 1.0, cancellation_identity),
        timed("Toeplitz identity", 5.0, toeplitz_identity),
        timed("noiseless end-to-end", 30.0, noiseless_end_to_end),
        timed("rank condition", 10.0, rank_condition),
        timed("comparative RMSE", 600.0, comparative_rmse),
        timed("power trend", 600.0, power_trend),
        timed("round-trip geometry", 1.0, roundtrip_geometry),
        timed("determinism", 60.0, determinism),
    ];
    let mut failed = 0;
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {}: {} [{:.2} s, budget {:.0} s]",
            o.name,
            o.detail,
            o.elapsed.as_secs_f64(),
            o.budget.as_secs_f64()
        );
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
