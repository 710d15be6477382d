use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the inference pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is numerically singular (last jitter tried: {jitter:e})")]
    NumericalSingularity { jitter: f64 },

    #[error("unsupported derivative order combination ({left_order},{right_order}) on dims ({left_dim},{right_dim})")]
    UnsupportedDerivative {
        left_order: u8,
        left_dim: usize,
        right_order: u8,
        right_dim: usize,
    },

    #[error("optimization failed: {reason} (best value so far {best_value})")]
    OptimizationFailed {
        reason: String,
        best_value: f64,
        best_point: Vec<f64>,
    },

    #[error("{what} = {value} is outside the admissible range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("root zone has zero depth at t = {t} s")]
    DegenerateRootZone { t: f64 },

    #[error("tridiagonal system has a zero pivot at row {row}")]
    SingularSystem { row: usize },

    #[error("Picard iteration diverged at t = {t} s (dt reached {dt} s)")]
    SolverDiverged { t: f64, dt: f64, last_head: Vec<f64> },

    #[error("forward solve failed at theta = {theta:?}: {source}")]
    ForwardFailed {
        theta: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("point ({z}, {t}) lies outside the solved field")]
    OutOfDomain { z: f64, t: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("residual covariance is degenerate: {0}")]
    DegenerateCovariance(String),

    #[error("MCMC start has zero target density")]
    InvalidStart,

    #[error("no valid importance samples (all {0} exact evaluations failed)")]
    NoValidSamples(usize),

    #[error("invalid KDE bandwidth: {0}")]
    InvalidBandwidth(String),

    #[error("density has zero mass on the HPD grid")]
    DegenerateDensity,

    #[error("cannot min-max scale a constant probe set")]
    DegenerateScaling,

    #[error("not found: {0}")]
    NotFound(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that stem from numerics rather than user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalSingularity { .. }
                | Error::OptimizationFailed { .. }
                | Error::SingularSystem { .. }
                | Error::SolverDiverged { .. }
                | Error::DegenerateCovariance(_)
                | Error::NoValidSamples(_)
                | Error::DegenerateDensity
                | Error::DegenerateScaling
                | Error::InvalidStart
                | Error::ForwardFailed { .. }
                | Error::DegenerateRootZone { .. }
        )
    }
}
