use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A state left the positive cone beyond the clamp tolerance.
    #[error("positivity violation at t = {time:?} ns: eigenvalues {eigenvalues:?}")]
    PositivityViolation {
        time: Option<f64>,
        eigenvalues: Vec<f64>,
    },

    /// The {I, H} constraint pair is linearly dependent under the
    /// state-weighted inner product.
    #[error("degenerate constraint Gram determinant {determinant:e} for qubit {qubit}")]
    DegenerateConstraints { qubit: usize, determinant: f64 },

    /// A computed metric fell outside its documented range.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("at tau = {tau} ns: {source}")]
    AtTau {
        tau: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics (positivity loss, degenerate
    /// constraints), possibly wrapped in sweep context.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::PositivityViolation { .. }
            | Error::DegenerateConstraints { .. }
            | Error::InvariantViolation(_) => true,
            Error::AtTau { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::AtTau { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
