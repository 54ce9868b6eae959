use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("invalid spatial grid: {0}")]
    InvalidSpatialGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("driver index {k} out of range (d1 = {d1})")]
    DriverIndex { k: usize, d1: usize },

    #[error("closed-form solution not applicable: {0}")]
    OracleNotApplicable(String),

    #[error("solution blew up at t = {t}: max |u| = {max_abs:e} exceeds {threshold:e}")]
    Blowup { t: f64, max_abs: f64, threshold: f64 },

    #[error("explicit stability bound violated: need at least {required} substeps per fine step, got {given}")]
    StabilityBound { required: usize, given: usize },

    #[error("rate fit needs at least 3 positive points, got {0}")]
    TooFewPoints(usize),

    #[error("path file: {0}")]
    PathFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
