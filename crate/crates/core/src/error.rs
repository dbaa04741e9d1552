use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// No effective kernel mass near the evaluation point.
    #[error("degenerate neighborhood at {point}: total kernel mass {mass:e}")]
    DegenerateNeighborhood { point: String, mass: f64 },

    /// The estimated Cartesian components are (numerically) the origin.
    #[error("undefined direction at {point}: resultant length {norm:e}")]
    UndefinedDirection { point: String, norm: f64 },

    #[error("singular local-linear design at {point} (condition estimate {condition:e})")]
    SingularFit { point: String, condition: f64 },

    #[error("bandwidth selection infeasible: {0}")]
    SelectionInfeasible(String),

    #[error("bootstrap aborted: {0}")]
    BootstrapAborted(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DegenerateNeighborhood { .. } => "degenerate_neighborhood",
            Error::UndefinedDirection { .. } => "undefined_direction",
            Error::SingularFit { .. } => "singular_fit",
            Error::SelectionInfeasible(_) => "selection_infeasible",
            Error::BootstrapAborted(_) => "bootstrap_aborted",
            Error::Schema(_) => "schema",
            Error::EmptyDataset(_) => "empty_dataset",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
