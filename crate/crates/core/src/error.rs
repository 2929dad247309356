use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("non-finite result: {0}")]
    NonFinite(String),

    #[error("{what} is not supported for the {class} class")]
    Unsupported { class: &'static str, what: &'static str },

    #[error("quadrature did not converge: value {value:e}, error estimate {error:e}")]
    NoConvergence { value: f64, error: f64 },

    #[error("inversion accuracy: {0}")]
    Inversion(String),

    #[error("resolution insufficient: {0}")]
    Resolution(String),

    #[error("periodic wraparound: {0}")]
    Wraparound(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("series coverage: {0}")]
    Coverage(String),

    #[error("fit: {0}")]
    Fit(String),

    #[error("path too short: running value {reached:e} below target {target:e}")]
    PathTooShort { reached: f64, target: f64 },

    #[error("parse: {0}")]
    Parse(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
