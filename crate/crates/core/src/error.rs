use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible angles: omega = {omega}, phi = {phi} (omega^2 + phi^2 must not exceed 1)")]
    InfeasibleAngles { omega: f64, phi: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("rank-deficient training matrix: sigma_min = {sigma_min:e}, sigma_min/sigma_max = {ratio:e}")]
    Singular { sigma_min: f64, ratio: f64 },

    #[error("degenerate sources in {stage}: leading partition Gram matrix is singular")]
    DegenerateSources { stage: &'static str },

    #[error("steering vector of source {index} vanishes after the training channel")]
    DegenerateSteering { index: usize },

    #[error("ray does not reach the localization plane (omega = {omega})")]
    NoIntersection { omega: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Wraps the error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InfeasibleAngles { .. } => "infeasible_angles",
            Error::Dimension { .. } => "dimension",
            Error::Singular { .. } => "singular",
            Error::DegenerateSources { .. } => "degenerate_sources",
            Error::DegenerateSteering { .. } => "degenerate_steering",
            Error::NoIntersection { .. } => "no_intersection",
            Error::Stage { source, .. } => source.kind(),
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
