use thiserror::Error;

/// Errors produced by the simulation and analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("state dimension {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("system of {oscillators} oscillators is too large to allocate")]
    DimensionOverflow { oscillators: usize },

    #[error("eigensolver failure: {0} (perturbing exactly degenerate bath frequencies may help)")]
    Eigensolver(String),

    #[error("numerical blow-up at t = {time}: non-finite state")]
    NumericalBlowup { time: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(&'static str),

    #[error("only {used} nonempty bins, at least {needed} required for a fit")]
    InsufficientBins { used: usize, needed: usize },

    #[error("non-thermal distribution: fitted log-slope {slope} is not negative")]
    NonThermal { slope: f64 },

    #[error("no root of the effective-temperature equation in [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the Boltzmann fit (as opposed to setup or numerics).
    pub fn is_fit_failure(&self) -> bool {
        matches!(
            self.root(),
            Error::NonThermal { .. }
                | Error::InsufficientBins { .. }
                | Error::DegenerateHistogram(_)
                | Error::NoRoot { .. }
        )
    }

    pub fn is_numerical_failure(&self) -> bool {
        matches!(
            self.root(),
            Error::Eigensolver(_) | Error::NumericalBlowup { .. } | Error::DimensionOverflow { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
