use thiserror::Error;

use crate::data::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: non-numeric value `{value}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: missing value")]
    MissingValue { row: usize, column: String },

    #[error("invalid dataset: {0}")]
    InvalidData(ValidationReport),

    #[error("invalid weight scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid estimand: {0}")]
    InvalidEstimand(String),

    #[error("propensity score {0} outside the open interval (0,1)")]
    PsOutOfRange(f64),

    #[error("collinear covariates")]
    Collinear,

    #[error("possible complete separation")]
    Separation,

    #[error("ambiguous PS source: both a provided PS column and a fitted model are available")]
    AmbiguousPsSource,

    #[error("no PS source: neither a provided PS column nor a fitted model is available")]
    MissingPsSource,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("degenerate weighted arm: {0} arm has zero total weight")]
    DegenerateArm(&'static str),

    #[error("undefined ratio measure")]
    UndefinedRatio,

    #[error("all weights are zero")]
    ZeroWeights,

    #[error("bootstrap: {0}")]
    Bootstrap(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by malformed input or configuration, as opposed to a
    /// numerical failure of an otherwise valid analysis.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_)
                | Error::NonNumeric { .. }
                | Error::MissingValue { .. }
                | Error::InvalidData(_)
                | Error::InvalidScheme(_)
                | Error::InvalidEstimand(_)
                | Error::PsOutOfRange(_)
                | Error::AmbiguousPsSource
                | Error::MissingPsSource
                | Error::LengthMismatch { .. }
                | Error::Config(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }

    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "missing_column",
            Error::NonNumeric { .. } => "non_numeric",
            Error::MissingValue { .. } => "missing_value",
            Error::InvalidData(_) => "invalid_data",
            Error::InvalidScheme(_) => "invalid_scheme",
            Error::InvalidEstimand(_) => "invalid_estimand",
            Error::PsOutOfRange(_) => "ps_out_of_range",
            Error::Collinear => "collinear",
            Error::Separation => "separation",
            Error::AmbiguousPsSource => "ambiguous_ps_source",
            Error::MissingPsSource => "missing_ps_source",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::DegenerateArm(_) => "degenerate_arm",
            Error::UndefinedRatio => "undefined_ratio",
            Error::ZeroWeights => "zero_weights",
            Error::Bootstrap(_) => "bootstrap",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
