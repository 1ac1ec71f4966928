use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ScenarioConfig;
use super::report::{Metric, RmseReport, RmseRow};
use super::trial::{run_trial, Method, MethodSet, Quantity, Scenario, TrialResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Total RIS elements; the row count is kept and the column count adjusted.
    RisElements,
    UeCount,
    /// Transmit power in dBm.
    TxPower,
    /// Number of RIS training phase vectors.
    ScheduleLen,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::RisElements => "ris_elements",
            SweepAxis::UeCount => "ue_count",
            SweepAxis::TxPower => "tx_power",
            SweepAxis::ScheduleLen => "schedule_len",
        }
    }

    /// Copy of `base` with the swept parameter set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 && value < 1e9 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!(
                    "{} takes positive integers, got {value}",
                    self.name()
                )))
            }
        };
        match self {
            SweepAxis::RisElements => {
                let n = count()?;
                let rows = cfg.ris.rows();
                if n % rows != 0 || (n / rows).is_multiple_of(2) {
                    return Err(Error::Config(format!(
                        "{n} elements do not form {rows} rows of an odd column count"
                    )));
                }
                cfg.ris.half_y = (n / rows - 1) / 2;
                if let Some(s) = cfg.schedule_len {
                    cfg.schedule_len = Some(s.min(n));
                }
            }
            SweepAxis::UeCount => {
                cfg.ues = count()?;
                cfg.pilot_len = cfg.pilot_len.max(cfg.ues);
            }
            SweepAxis::TxPower => {
                if !value.is_finite() {
                    return Err(Error::Config("transmit power must be finite".into()));
                }
                cfg.tx_power_dbm = value;
            }
            SweepAxis::ScheduleLen => cfg.schedule_len = Some(count()?),
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ris_elements" => SweepAxis::RisElements,
            "ue_count" => SweepAxis::UeCount,
            "tx_power" => SweepAxis::TxPower,
            "schedule_len" => SweepAxis::ScheduleLen,
            other => {
                return Err(Error::Config(format!(
                    "unknown sweep axis {other:?} (ris_elements, ue_count, tx_power, schedule_len)"
                )))
            }
        })
    }
}

/// Trials of one configuration, in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBatch {
    pub axis: Option<f64>,
    pub trials: Vec<TrialResult>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub report: RmseReport,
    pub batches: Vec<TrialBatch>,
}

/// Runs every trial of `scenario` in parallel; results keep index order.
pub fn run_trials(scenario: &Scenario, methods: MethodSet) -> Result<Vec<TrialResult>> {
    (0..scenario.config.trials)
        .into_par_iter()
        .map(|i| run_trial(scenario, i, methods))
        .collect()
}

/// Per-UE RMSE `sqrt(mean_t e_t)` over trials, in label order.
pub fn per_ue_rmse(trials: &[TrialResult], method: Method, quantity: Quantity) -> Vec<f64> {
    let mut sums: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for t in trials {
        let Some(r) = t.method(method) else { continue };
        if sums.is_empty() {
            sums = vec![0.0; r.ues.len()];
        }
        for (s, u) in sums.iter_mut().zip(&r.ues) {
            *s += u.errors.get(quantity);
        }
        n += 1;
    }
    sums.into_iter().map(|s| (s / n as f64).sqrt()).collect()
}

/// RMSE rows for one axis value, ordered method, metric, quantity.
pub fn aggregate(trials: &[TrialResult], axis: Option<f64>, methods: MethodSet, seed: u64) -> Vec<RmseRow> {
    let mut rows = Vec::new();
    for &method in methods.methods() {
        let per: Vec<Vec<f64>> = Quantity::ALL
            .iter()
            .map(|&q| per_ue_rmse(trials, method, q))
            .collect();
        for metric in Metric::ALL {
            for (qi, &quantity) in Quantity::ALL.iter().enumerate() {
                let v = &per[qi];
                let sum: f64 = v.iter().sum();
                let rmse = match metric {
                    Metric::Sum => sum,
                    Metric::Max => v.iter().copied().fold(0.0, f64::max),
                    Metric::Avg => sum / v.len().max(1) as f64,
                };
                rows.push(RmseRow {
                    axis,
                    method,
                    metric,
                    quantity,
                    rmse,
                    trials: trials.len(),
                    seed,
                });
            }
        }
    }
    rows
}

/// All trials of one configuration.
pub fn run(config: &ScenarioConfig, methods: MethodSet) -> Result<SweepOutcome> {
    let scenario = Scenario::prepare(config)?;
    let trials = run_trials(&scenario, methods)?;
    Ok(SweepOutcome {
        report: RmseReport {
            axis: None,
            config: config.clone(),
            rows: aggregate(&trials, None, methods, config.seed),
        },
        batches: vec![TrialBatch { axis: None, trials }],
    })
}

/// Runs `config` at every value of `axis`. All values share the master seed,
/// so trial `i` sees the same UE draws wherever the UE count allows.
pub fn sweep(config: &ScenarioConfig, axis: SweepAxis, values: &[f64], methods: MethodSet) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut rows = Vec::new();
    let mut batches = Vec::new();
    for &v in values {
        let cfg = axis.apply(config, v)?;
        let scenario = Scenario::prepare(&cfg)?;
        let trials = run_trials(&scenario, methods)?;
        rows.extend(aggregate(&trials, Some(v), methods, cfg.seed));
        batches.push(TrialBatch {
            axis: Some(v),
            trials,
        });
    }
    Ok(SweepOutcome {
        report: RmseReport {
            axis: Some(axis),
            config: config.clone(),
            rows,
        },
        batches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::trial::{MethodResult, SquaredErrors, UeGuess, UeRecord, UeTruth};
    use crate::geometry::Vec3;
    use num_complex::Complex64;

    fn fake(errs: &[[f64; 2]]) -> Vec<TrialResult> {
        let truth = UeTruth {
            position: Vec3::ZERO,
            omega: 0.0,
            phi: 0.0,
            distance: 1.0,
            gain: Complex64::new(0.0, 0.0),
        };
        let guess = UeGuess {
            omega: 0.0,
            phi: 0.0,
            distance: 1.0,
            position: Vec3::ZERO,
            gain: Complex64::new(0.0, 0.0),
        };
        errs.iter()
            .enumerate()
            .map(|(i, e)| TrialResult {
                trial: i,
                seed: 1,
                methods: vec![MethodResult {
                    method: Method::Nf,
                    ues: e
                        .iter()
                        .map(|&x| UeRecord {
                            label: String::new(),
                            truth,
                            estimate: guess,
                            errors: SquaredErrors {
                                omega: x,
                                phi: x,
                                distance: x,
                                location: x,
                                gain: x,
                            },
                            valid: true,
                        })
                        .collect(),
                    warnings: vec![],
                }],
            })
            .collect()
    }

    #[test]
    fn aggregation_matches_hand_computation() {
        let trials = fake(&[[1.0, 4.0], [3.0, 12.0]]);
        let rows = aggregate(&trials, Some(2.0), MethodSet::Nf, 1);
        assert_eq!(rows.len(), 3 * 5);
        let near = 2f64.sqrt();
        let far = 8f64.sqrt();
        let find = |m: Metric| rows.iter().find(|r| r.metric == m && r.quantity == Quantity::Location).unwrap().rmse;
        assert!((find(Metric::Sum) - (near + far)).abs() < 1e-15);
        assert!((find(Metric::Max) - far).abs() < 1e-15);
        assert!((find(Metric::Avg) - (near + far) / 2.0).abs() < 1e-15);
        assert!(rows.iter().all(|r| r.trials == 2 && r.axis == Some(2.0)));
    }

    #[test]
    fn axis_application() {
        let base = ScenarioConfig::desk();
        let c = SweepAxis::RisElements.apply(&base, 11.0 * 21.0).unwrap();
        assert_eq!(c.ris.num_elements(), 231);
        assert!(SweepAxis::RisElements.apply(&base, 11.0 * 20.0).is_err());
        assert!(SweepAxis::RisElements.apply(&base, 100.0).is_err());
        let c = SweepAxis::UeCount.apply(&base, 3.0).unwrap();
        assert_eq!(c.ues, 3);
        assert!(SweepAxis::UeCount.apply(&base, 2.5).is_err());
        assert_eq!(SweepAxis::TxPower.apply(&base, 7.0).unwrap().tx_power_dbm, 7.0);
        let mut loose = base.clone();
        loose.strict = false;
        assert_eq!(SweepAxis::ScheduleLen.apply(&loose, 40.0).unwrap().schedule_len, Some(40));
        assert!(SweepAxis::ScheduleLen.apply(&base, 10.0).is_err());
        for a in ["ris_elements", "ue_count", "tx_power", "schedule_len"] {
            assert_eq!(a.parse::<SweepAxis>().unwrap().name(), a);
        }
        assert!("power".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn empty_sweep_is_rejected() {
        assert!(sweep(&ScenarioConfig::desk(), SweepAxis::TxPower, &[], MethodSet::Both).is_err());
    }
}
