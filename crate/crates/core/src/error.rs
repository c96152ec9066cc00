use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("{operation} requires dimension {expected}, got {actual}")]
    Dimension { operation: &'static str, expected: usize, actual: usize },

    #[error("{operation} does not support potential {potential}")]
    UnsupportedPotential { operation: &'static str, potential: String },

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions (value {value:e}, error estimate {error:e})"
    )]
    NoConvergence { subdivisions: usize, value: f64, error: f64 },

    #[error("hermite order {0} exceeds the supported maximum of 60")]
    HermiteOrder(usize),

    #[error("grid is not strictly increasing at index {0}")]
    NonMonotoneGrid(usize),

    #[error("degenerate energies E_{0} = E_{1}")]
    DegenerateSpectrum(usize, usize),

    #[error("gauge shift {shift} exceeds grid margin [{lo}, {hi}]")]
    ShiftOutsideGrid { shift: f64, lo: f64, hi: f64 },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed ensemble file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
