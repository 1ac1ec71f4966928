use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{ff_localize_2d, music_2d};
use crate::channel::{
    attenuation_model, dbm_to_watts, impinging, ris_ap_channel, steering_exact, steering_far,
    AntennaGains, Attenuation, Carrier, NoiseModel, Source,
};
use crate::error::{Error, Result};
use crate::estimator::{localize, omp_gains, EstimatorContext, GridConfig, Warning};
use crate::geometry::{UeGroundTruth, Vec3};
use crate::training::{
    dft_schedule, ls_recover, ls_recover_truncated, orthogonal_pilots, sample_covariance,
    stacked_channel, PilotBook, StackedChannel,
};
use crate::CVector;

use super::config::ScenarioConfig;

/// Salt separating the noise stream from the geometry stream of a trial.
const NOISE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Largest UE count matched by exhaustive assignment.
const EXHAUSTIVE_MATCH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Nf,
    Ff,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Nf => "nf",
            Method::Ff => "ff",
        }
    }
}

/// Which estimators a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSet {
    Nf,
    Ff,
    Both,
}

impl MethodSet {
    pub fn methods(self) -> &'static [Method] {
        match self {
            MethodSet::Nf => &[Method::Nf],
            MethodSet::Ff => &[Method::Ff],
            MethodSet::Both => &[Method::Nf, Method::Ff],
        }
    }
}

/// Quantities with a recorded error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Omega,
    Phi,
    Distance,
    Location,
    Gain,
}

impl Quantity {
    pub const ALL: [Quantity; 5] = [
        Quantity::Omega,
        Quantity::Phi,
        Quantity::Distance,
        Quantity::Location,
        Quantity::Gain,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquaredErrors {
    pub omega: f64,
    pub phi: f64,
    pub distance: f64,
    pub location: f64,
    /// `|ĝ - g|^2` on the cascaded coefficient.
    pub gain: f64,
}

impl SquaredErrors {
    pub fn get(&self, q: Quantity) -> f64 {
        match q {
            Quantity::Omega => self.omega,
            Quantity::Phi => self.phi,
            Quantity::Distance => self.distance,
            Quantity::Location => self.location,
            Quantity::Gain => self.gain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeTruth {
    pub position: Vec3,
    pub omega: f64,
    pub phi: f64,
    pub distance: f64,
    /// Cascaded coefficient `g_A g_{R,u}`.
    pub gain: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeGuess {
    pub omega: f64,
    pub phi: f64,
    pub distance: f64,
    pub position: Vec3,
    pub gain: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRecord {
    /// `near`/`far` for two UEs, `ue{k}` by increasing distance otherwise.
    pub label: String,
    pub truth: UeTruth,
    pub estimate: UeGuess,
    pub errors: SquaredErrors,
    /// False when the estimate is a failure sentinel.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub ues: Vec<UeRecord>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub methods: Vec<MethodResult>,
}

impl TrialResult {
    pub fn method(&self, m: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == m)
    }
}

/// Trial-invariant state: the training channel is factored once per scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub carrier: Carrier,
    pub channel: StackedChannel,
    pub pilots: PilotBook,
    pub noise: NoiseModel,
    pub power: f64,
    /// Distance search interval.
    pub d_range: [f64; 2],
    /// AP-center to RIS-center distance, used for the common RIS-AP coefficient.
    pub ap_distance: f64,
}

impl Scenario {
    pub fn prepare(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let carrier = config.carrier()?;
        let ap_ris = ris_ap_channel(&config.ap, &config.ris, &carrier)?;
        let schedule = dft_schedule(config.ris.num_elements(), config.schedule_len())?;
        let channel = stacked_channel(&ap_ris, &schedule)?;
        if config.strict && !channel.conditioning.full_rank() {
            return Err(Error::Singular {
                sigma_min: channel.conditioning.sigma_min,
                ratio: channel.conditioning.ratio(),
            }
            .in_stage("training"));
        }
        let d_max = match config.grid.d_max {
            Some(d) => d,
            None => config.ris.fraunhofer_distance(carrier.wavelength())?,
        };
        if !(d_max > config.grid.d_min) {
            return Err(Error::Config(format!(
                "distance search interval [{}, {d_max}] is empty",
                config.grid.d_min
            )));
        }
        Ok(Self {
            carrier,
            pilots: orthogonal_pilots(config.pilot_len, config.ues)?,
            noise: NoiseModel::new(dbm_to_watts(config.noise_dbm))?,
            power: dbm_to_watts(config.tx_power_dbm),
            d_range: [config.grid.d_min, d_max],
            ap_distance: config.ap.position.distance(&config.ris.center),
            channel,
            config: config.clone(),
        })
    }

    fn grid(&self) -> &GridConfig {
        &self.config.grid
    }

    /// Alias period of omega on the down-sampled array.
    pub fn period(&self) -> f64 {
        crate::estimator::decimated_period(&self.config.ris, &self.carrier)
    }

    /// Geometry and noise generators of trial `index`.
    pub fn rngs(&self, index: usize) -> (ChaCha8Rng, ChaCha8Rng) {
        let mut geo = ChaCha8Rng::seed_from_u64(self.config.seed);
        geo.set_stream(index as u64);
        let mut noise = ChaCha8Rng::seed_from_u64(self.config.seed ^ NOISE_SALT);
        noise.set_stream(index as u64);
        (geo, noise)
    }
}

/// Noisy stacked observations of one trial with the truth behind them.
#[derive(Debug, Clone)]
pub struct Realization {
    pub ues: Vec<UeGroundTruth>,
    pub attenuation: Vec<Attenuation>,
    pub slots: Vec<CVector>,
}

impl Realization {
    pub fn truths(&self) -> Vec<UeTruth> {
        self.ues
            .iter()
            .zip(&self.attenuation)
            .map(|(u, a)| UeTruth {
                position: u.position,
                omega: u.omega,
                phi: u.phi,
                distance: u.distance,
                gain: a.cascaded(),
            })
            .collect()
    }
}

/// Draws UEs, link coefficients and noise for trial `index`.
pub fn realize(scenario: &Scenario, index: usize) -> Result<Realization> {
    let cfg = &scenario.config;
    let (mut geo, mut noise_rng) = scenario.rngs(index);
    let mut ues = cfg.sample_ues(scenario.period(), &mut geo)?;
    ues.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    let ue_link = AntennaGains {
        tx_dbi: cfg.gains.tx_dbi,
        rx_dbi: 0.0,
    };
    let ap_link = AntennaGains {
        tx_dbi: 0.0,
        rx_dbi: cfg.gains.rx_dbi,
    };
    let g_a = attenuation_model(scenario.ap_distance, &scenario.carrier, &ap_link, &mut geo)?;
    let attenuation = ues
        .iter()
        .map(|u| {
            Ok(Attenuation {
                ris_ue: attenuation_model(u.distance, &scenario.carrier, &ue_link, &mut geo)?,
                ap_ris: g_a,
                power: scenario.power,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sources: Vec<Source> = ues
        .iter()
        .zip(&attenuation)
        .map(|(u, a)| Source {
            steering: steering_exact(u, &cfg.ris, &scenario.carrier),
            attenuation: *a,
        })
        .collect();
    let n_r = cfg.ris.num_elements();
    let slots = (0..scenario.pilots.slots())
        .map(|t| {
            let h = impinging(&sources, &scenario.pilots.slot(t), n_r)?;
            Ok(scenario.channel.apply(&h) + scenario.noise.sample(scenario.channel.rows(), &mut noise_rng))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Realization {
        ues,
        attenuation,
        slots,
    })
}

fn recover(scenario: &Scenario, slots: &[CVector]) -> Result<crate::training::CovarianceEstimate> {
    let ch = &scenario.channel;
    let recovered = slots
        .iter()
        .map(|y| {
            if ch.conditioning.full_rank() {
                ls_recover(y, ch)
            } else {
                ls_recover_truncated(y, ch)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cov = sample_covariance(&recovered)?;
    if scenario.config.subtract_noise_bias {
        cov.noise_bias = Some(ch.noise_bias(scenario.noise.variance));
    }
    Ok(cov)
}

fn labels(u: usize) -> Vec<String> {
    if u == 2 {
        vec!["near".into(), "far".into()]
    } else {
        (0..u).map(|k| format!("ue{k}")).collect()
    }
}

/// Assignment of truths to estimates minimizing the summed cost: exhaustive
/// for small counts, greedy nearest-neighbor otherwise. `out[i]` is the
/// estimate given to truth `i`.
pub(crate) fn assign(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n <= EXHAUSTIVE_MATCH {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = perm.clone();
        let mut best_cost = f64::INFINITY;
        loop {
            let c: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            if c < best_cost {
                best_cost = c;
                best.clone_from(&perm);
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        return best;
    }
    let mut taken = vec![false; n];
    let mut out = vec![0; n];
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    pairs.sort_by(|a, b| cost[a.0][a.1].total_cmp(&cost[b.0][b.1]).then(a.cmp(b)));
    let mut done = vec![false; n];
    for (i, j) in pairs {
        if !done[i] && !taken[j] {
            done[i] = true;
            taken[j] = true;
            out[i] = j;
        }
    }
    out
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("pivot exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn sentinel(scenario: &Scenario) -> UeGuess {
    UeGuess {
        omega: 0.0,
        phi: 0.0,
        distance: 0.0,
        position: scenario.config.ris.center,
        gain: Complex64::new(0.0, 0.0),
    }
}

fn score(truth: &UeTruth, est: &UeGuess) -> SquaredErrors {
    SquaredErrors {
        omega: (est.omega - truth.omega).powi(2),
        phi: (est.phi - truth.phi).powi(2),
        distance: (est.distance - truth.distance).powi(2),
        location: est.position.distance(&truth.position).powi(2),
        gain: (est.gain - truth.gain).norm_sqr(),
    }
}

fn records(
    scenario: &Scenario,
    truths: &[UeTruth],
    guesses: Option<Vec<UeGuess>>,
    by_angle: bool,
) -> Vec<UeRecord> {
    let names = labels(truths.len());
    let (guesses, valid) = match guesses {
        Some(g) => (g, true),
        None => (vec![sentinel(scenario); truths.len()], false),
    };
    let cost: Vec<Vec<f64>> = truths
        .iter()
        .map(|t| {
            guesses
                .iter()
                .map(|g| {
                    if by_angle {
                        (g.omega - t.omega).powi(2) + (g.phi - t.phi).powi(2)
                    } else {
                        g.position.distance(&t.position)
                    }
                })
                .collect()
        })
        .collect();
    let order = assign(&cost);
    truths
        .iter()
        .zip(order)
        .zip(names)
        .map(|((t, j), label)| UeRecord {
            label,
            truth: *t,
            estimate: guesses[j],
            errors: score(t, &guesses[j]),
            valid,
        })
        .collect()
}

fn failure(stage: &str, e: &Error) -> Warning {
    Warning::Failed {
        stage: stage.to_string(),
        message: e.to_string(),
    }
}

fn run_nf(
    scenario: &Scenario,
    cov: &crate::training::CovarianceEstimate,
    slots: &[CVector],
    powers: &[f64],
) -> Result<(Vec<UeGuess>, Vec<Warning>)> {
    let cfg = &scenario.config;
    let ctx = EstimatorContext {
        geom: &cfg.ris,
        carrier: &scenario.carrier,
        grid: scenario.grid(),
        d_range: scenario.d_range,
        channel: &scenario.channel,
        pilots: &scenario.pilots,
        powers,
    };
    let est = localize(cov, slots, &ctx, cfg.ues)?;
    let mut warnings = Vec::new();
    let guesses = est
        .into_iter()
        .map(|e| {
            for w in e.warnings {
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
            UeGuess {
                omega: e.omega,
                phi: e.phi,
                distance: e.distance,
                position: e.position,
                gain: e.gain,
            }
        })
        .collect();
    Ok((guesses, warnings))
}

fn run_ff(
    scenario: &Scenario,
    cov: &crate::training::CovarianceEstimate,
    slots: &[CVector],
    powers: &[f64],
) -> Result<(Vec<UeGuess>, Vec<Warning>)> {
    let cfg = &scenario.config;
    let r = crate::training::CovarianceEstimate {
        matrix: cov.debiased(),
        snapshots: cov.snapshots,
        noise_bias: None,
    };
    let music = music_2d(&r, cfg.ues, &cfg.ris, &scenario.carrier, scenario.grid())
        .map_err(|e| e.in_stage("music"))?;
    let mut warnings = music.warnings;
    let plane = cfg.placement.plane_z();
    let mut positions = Vec::with_capacity(cfg.ues);
    for &(w, p) in &music.angles {
        let pos = match plane {
            Some(z) => ff_localize_2d(w, p, &cfg.ris, z),
            None => Err(Error::Config("UEs do not share a plane".into())),
        };
        match pos {
            Ok(v) => positions.push(Some(v)),
            Err(e) => {
                warnings.push(failure("far-field location", &e));
                positions.push(None);
            }
        }
    }
    let steering = music
        .angles
        .iter()
        .map(|&(w, p)| steering_far(w, p, &cfg.ris, &scenario.carrier).map(|s| s.entries))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("far-field gains"))?;
    let distances: Vec<f64> = positions
        .iter()
        .map(|p| p.map_or(f64::INFINITY, |v| v.distance(&cfg.ris.center)))
        .collect();
    let gains = omp_gains(slots, &steering, &distances, &scenario.channel, &scenario.pilots, powers)
        .map_err(|e| e.in_stage("far-field gains"))?;
    let guesses = music
        .angles
        .iter()
        .zip(positions)
        .zip(gains)
        .map(|((&(w, p), pos), g)| {
            let pos = pos.unwrap_or(cfg.ris.center);
            UeGuess {
                omega: w,
                phi: p,
                distance: pos.distance(&cfg.ris.center),
                position: pos,
                gain: g,
            }
        })
        .collect();
    Ok((guesses, warnings))
}

/// Runs the selected estimators on one realization of trial `index`.
///
/// Estimator failures become warnings with sentinel estimates (angles and
/// distance zero, position at the RIS center, zero gain).
pub fn run_trial(scenario: &Scenario, index: usize, methods: MethodSet) -> Result<TrialResult> {
    let real = realize(scenario, index)?;
    let truths = real.truths();
    let powers = vec![scenario.power; truths.len()];
    let cov = recover(scenario, &real.slots)?;
    let mut out = Vec::new();
    for &m in methods.methods() {
        let run = match m {
            Method::Nf => run_nf(scenario, &cov, &real.slots, &powers),
            Method::Ff => run_ff(scenario, &cov, &real.slots, &powers),
        };
        let (guesses, warnings) = match run {
            Ok((g, w)) => (Some(g), w),
            Err(e) => (None, vec![failure(m.as_str(), &e)]),
        };
        out.push(MethodResult {
            method: m,
            ues: records(scenario, &truths, guesses, m == Method::Ff),
            warnings,
        });
    }
    Ok(TrialResult {
        trial: index,
        seed: scenario.config.seed,
        methods: out,
    })
}
