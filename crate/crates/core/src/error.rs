use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("non-finite {what} at z = {x} + {y}i")]
    NonFinite { what: &'static str, x: f64, y: f64 },

    #[error("radius unbounded at z = {x} + {y}i: the Laplacian vanishes on every probed disk")]
    RadiusUnbounded { x: f64, y: f64 },

    #[error("symbol is not Hermitian (max asymmetry {asymmetry:.3e}) at z = {x} + {y}i")]
    NotHermitian { asymmetry: f64, x: f64, y: f64 },

    #[error("assembled matrix is not Hermitian: max deviation {deviation:.3e}")]
    AssemblyNotHermitian { deviation: f64 },

    #[error("duplicate point at index {first} and {second}")]
    DuplicatePoint { first: usize, second: usize },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("numerical check `{check}` failed: {detail}")]
    Check { check: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

impl Error {
    /// Process exit status: 2 for configuration and input errors, 3 for
    /// failed numerical checks, 1 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter { .. }
            | Error::Unknown { .. }
            | Error::Expression { .. }
            | Error::Config(_)
            | Error::Format(_)
            | Error::DuplicatePoint { .. } => 2,
            Error::NonFinite { .. }
            | Error::RadiusUnbounded { .. }
            | Error::NotHermitian { .. }
            | Error::AssemblyNotHermitian { .. }
            | Error::Check { .. } => 3,
            Error::Io(_) => 1,
        }
    }
}
