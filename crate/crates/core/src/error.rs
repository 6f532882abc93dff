use thiserror::Error;

/// Failures surfaced by the library. Every variant maps to a stable exit code
/// in the command line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("contact angle {measured} outside admissible band [{min}, {max}]")]
    AngleBounds { measured: f64, min: f64, max: f64 },
    #[error("collar chart degenerate: {0}")]
    CollarOverflow(String),
    #[error("inverted element {index} (signed area {area})")]
    InvertedElement { index: usize, area: f64 },
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("incompatible Neumann data, residual {residual}")]
    Incompatible { residual: f64 },
    #[error("root finding failed: {0}")]
    RootFinding(String),
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("rotational initial data is not supported by the potential-flow stepper")]
    Rotational,
    #[error("monitor violation at t = {time}: {reason}")]
    Monitor { time: f64, reason: String },
}

impl Error {
    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::AngleBounds { .. } => "angle_bounds",
            Error::CollarOverflow(_) => "collar_overflow",
            Error::InvertedElement { .. } => "inverted_element",
            Error::Solver(_) => "solver",
            Error::Incompatible { .. } => "incompatible_data",
            Error::RootFinding(_) => "root_finding",
            Error::Divergent(_) => "divergent",
            Error::Config(_) => "config",
            Error::Rotational => "rotational_data",
            Error::Monitor { .. } => "monitor",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
