use thiserror::Error;

/// Which side of the static no-arbitrage interval a quoted price breached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lower,
    Upper,
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::Lower => f.write_str("lower"),
            Bound::Upper => f.write_str("upper"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("price {price} violates the {bound} no-arbitrage bound {limit}")]
    OutOfRange {
        bound: Bound,
        price: f64,
        limit: f64,
    },

    #[error("no convergence after {iterations} iterations: {what}")]
    Convergence { what: String, iterations: usize },

    #[error("numerical error: {what} (estimate {estimate}, error bound {error_bound})")]
    Numerical {
        what: String,
        estimate: f64,
        error_bound: f64,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("convention error: {0}")]
    Convention(String),

    #[error("calibration failed: {what} (best residual {residual})")]
    Calibration {
        what: String,
        best: Vec<f64>,
        residual: f64,
    },

    #[error("no data for rebalance date {0}")]
    Gap(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// Coarse classification used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain(_) => ErrorKind::Argument,
            Error::Data(_) | Error::Gap(_) | Error::Csv(_) | Error::Json(_) | Error::Io(_) => {
                ErrorKind::Data
            }
            Error::Convention(_) => ErrorKind::Data,
            Error::OutOfRange { .. }
            | Error::Convergence { .. }
            | Error::Numerical { .. }
            | Error::Calibration { .. } => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Argument,
    Data,
    Numerical,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {x}")))
    }
}
