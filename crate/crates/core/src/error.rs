use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("CFL violation: {0}")]
    Cfl(String),

    #[error("flux validation failed: {0}")]
    FluxValidation(String),

    #[error("extremum of the flux could not be resolved on [{lo}, {hi}]: uncertainty {uncertainty:e}")]
    Extremum { lo: f64, hi: f64, uncertainty: f64 },

    #[error("non-finite state at step {step} (cell {cell})")]
    NonFinite { step: usize, cell: usize },

    #[error("time grids do not tile: {0}")]
    Tiling(String),

    #[error("time {t} is outside step [{start}, {end}]")]
    OutsideStep { t: f64, start: f64, end: f64 },

    #[error("exact solution unavailable: {0}")]
    ExactSolution(String),
}

impl Error {
    /// Machine-readable category, used by the CLI for exit codes and
    /// one-line diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) | Error::Config(_) | Error::ExactSolution(_) => "config",
            Error::Cfl(_) => "cfl",
            Error::FluxValidation(_) | Error::Extremum { .. } => "validation",
            Error::NonFinite { .. } => "blowup",
            Error::Tiling(_) | Error::OutsideStep { .. } => "config",
        }
    }
}
