use thiserror::Error;

/// Errors raised by the numerical core and the experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("capability: {0}")]
    Capability(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error("scale precondition violated: {0}")]
    Scale(String),

    #[error("certificate violated: {0}")]
    Certificate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cap exceeded: {0}")]
    CapExceeded(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CapExceeded(_) => 3,
            Error::Io(_) | Error::Numeric(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
