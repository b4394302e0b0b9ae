use thiserror::Error;

/// Errors produced by diagram construction, metrics, estimators and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("homology dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: u8, right: u8 },

    #[error("diagram carries an essential (infinite) bar; apply an infinite-bar policy first")]
    UnhandledEssentialClass,

    #[error("invalid Wasserstein order p = {0}; must be finite and >= 1")]
    InvalidOrder(f64),

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("grid [{lo}, {hi}] does not cover the required range [{need_lo}, {need_hi}]")]
    Coverage {
        lo: f64,
        hi: f64,
        need_lo: f64,
        need_hi: f64,
    },

    #[error("incompatible landscapes: {0}")]
    IncompatibleLandscape(String),

    #[error("positivity violation: cell (t={t}, z={z}) has {count} records, need at least {min}")]
    Positivity { t: u8, z: u32, count: usize, min: usize },

    #[error("positivity violation: arm t={t} has {count} records, need at least {min}")]
    ArmTooSmall { t: u8, count: usize, min: usize },

    #[error("diagnostic undefined: {0}")]
    DiagnosticUndefined(String),

    #[error("replication {replication}: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
