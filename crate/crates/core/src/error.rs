use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Pre- and postselected states are orthogonal, so the weak value diverges.
    #[error("singular weak value: {0}")]
    SingularWeakValue(String),

    /// The forward model or an estimator left its region of validity.
    #[error("model error: {0}")]
    Model(String),

    /// The record does not carry enough information for the estimator.
    #[error("degenerate record: {0}")]
    Degenerate(String),

    #[error(
        "no sign change of the likelihood equation in [{lo:e}, {hi:e}] s \
         (residuals {residual_lo:e}, {residual_hi:e})"
    )]
    Bracketing {
        lo: f64,
        hi: f64,
        residual_lo: f64,
        residual_hi: f64,
    },

    #[error("quartic has no real root (coefficients {coefficients:?})")]
    NoRealRoot { coefficients: [f64; 5] },

    #[error("waveplate geometry error: {0}")]
    Geometry(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    /// Malformed input file. `line` is 1-based and counts the header.
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by malformed input files or configuration,
    /// as opposed to a model or estimator failure on well-formed input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Format { .. } | Error::Config(_) | Error::Io { .. }
        )
    }

    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::SingularWeakValue(_) => "singular_weak_value",
            Error::Model(_) => "model",
            Error::Degenerate(_) => "degenerate",
            Error::Bracketing { .. } => "bracketing",
            Error::NoRealRoot { .. } => "no_real_root",
            Error::Geometry(_) => "geometry",
            Error::InvalidSpectrum(_) => "invalid_spectrum",
            Error::Format { .. } => "format",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
