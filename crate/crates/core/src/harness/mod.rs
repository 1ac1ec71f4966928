//! Trials, sweeps and reports.
//!
//! A [`ScenarioConfig`] describes the deployment; [`Scenario::prepare`]
//! factors its training channel once, and each trial draws UE positions,
//! link coefficients and noise from two ChaCha8 streams keyed by the master
//! seed and the trial index. Both estimators consume the same realization.

pub mod config;
pub mod report;
pub mod sweep;
pub mod trial;
pub mod validate;

pub use config::{Placement, ScenarioConfig, DESK_NOISE_DBM};
pub use report::{parse_csv, read_csv, read_json, Format, Metric, RmseReport, RmseRow, CSV_HEADER};
pub use sweep::{aggregate, per_ue_rmse, run, run_trials, sweep, SweepAxis, SweepOutcome, TrialBatch};
pub use trial::{
    realize, run_trial, Method, MethodResult, MethodSet, Quantity, Realization, Scenario,
    SquaredErrors, TrialResult, UeGuess, UeRecord, UeTruth,
};
pub use validate::{validate, Check, ValidationReport};
