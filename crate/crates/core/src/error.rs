use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient sample: {rows} observations, need more than {required}")]
    InsufficientSample { rows: usize, required: usize },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure in {step} at sweep {sweep}")]
    Numerical { step: &'static str, sweep: usize },

    #[error("infeasible restrictions: {0}")]
    InfeasibleRestrictions(String),

    #[error("identification infeasible: acceptance {acceptance:.3e} below floor {floor:.3e} ({accepted}/{attempted} reduced-form draws)")]
    IdentificationInfeasible {
        acceptance: f64,
        floor: f64,
        accepted: usize,
        attempted: usize,
    },

    #[error("unknown shock '{0}'")]
    UnknownShock(String),

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl std::fmt::Display,
        got: impl std::fmt::Display,
    ) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// Attaches a sweep index to a numerical failure raised inside a draw.
    pub(crate) fn at_sweep(self, sweep: usize) -> Self {
        match self {
            Error::Numerical { step, .. } => Error::Numerical { step, sweep },
            other => other,
        }
    }
}
