use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_INFEASIBLE: i32 = 5;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),

    #[error("missing artifact {}: run `panelvar {stage}` first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("artifact {} does not match the configuration: {reason}", path.display())]
    StaleArtifact { path: PathBuf, reason: String },

    #[error(transparent)]
    Model(#[from] panelvar::Error),

    #[error(transparent)]
    Data(#[from] panelvar_ingest::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => EXIT_CONFIG,
            Error::MissingArtifact { .. } | Error::StaleArtifact { .. } | Error::Io { .. } => EXIT_DATA,
            Error::Model(e) => model_exit_code(e),
            Error::Data(panelvar_ingest::Error::Model(e)) => model_exit_code(e),
            Error::Data(_) => EXIT_DATA,
        }
    }
}

fn model_exit_code(e: &panelvar::Error) -> i32 {
    use panelvar::Error as M;
    match e {
        M::Config(_) | M::UnknownShock(_) | M::InfeasibleRestrictions(_) => EXIT_CONFIG,
        M::Numerical { .. } => EXIT_NUMERICAL,
        M::IdentificationInfeasible { .. } => EXIT_INFEASIBLE,
        M::InsufficientSample { .. }
        | M::Shape { .. }
        | M::DegenerateData(_)
        | M::InvalidInput(_)
        | M::Format(_)
        | M::Io(_) => EXIT_DATA,
    }
}
