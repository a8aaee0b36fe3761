use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The stream has no further indicators; callers finalize at the
    /// current state.
    #[error("indicator stream exhausted after {0} indicators")]
    StreamExhausted(u64),

    #[error("aggressive strategy asked to bet after a loss (wealth is absorbed at zero)")]
    CalledAfterLoss,

    #[error("posterior of the working prior is degenerate at t={t}, losses={losses}")]
    DegeneratePosterior { t: u64, losses: u64 },

    #[error("test already stopped ({0}); restarting a stopped test is not allowed")]
    AlreadyStopped(String),

    #[error("random stream (seed {seed}, stream {stream}) was already used for stochastic rounding")]
    RngReuse { seed: u64, stream: u64 },

    #[error("betting vector must sum to {expected}, got {actual}")]
    InvalidTarget { expected: f64, actual: f64 },

    #[error("value {p} is not on the support {{r/(T+1)}} for T={horizon}")]
    OffSupport { p: f64, horizon: u64 },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid configuration keys: {0:?}")]
    InvalidConfigKeys(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
