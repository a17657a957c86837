use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("class `{0}` has no samples")]
    EmptyClass(String),

    #[error("genotype column `{0}` holds values outside {{0, 0.5, 1}}")]
    InvalidGenotype(String),

    #[error("rank-deficient covariates; colliding columns: {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("column `{0}` has zero standard deviation on the reference class")]
    ZeroVariance(String),

    #[error("class {class} has {count} samples, need at least {needed}")]
    ClassTooSmall {
        class: usize,
        count: usize,
        needed: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid hyperparameter `{name}` = {value}: {reason}")]
    Hyperparameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("non-finite training loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("fitting task {positive} vs {negative} (bank {bank}) failed: {source}")]
    TaskFit {
        bank: usize,
        positive: usize,
        negative: String,
        #[source]
        source: Box<Error>,
    },

    #[error("operation requires a tree-based model, got {0}")]
    NotTreeBased(String),

    #[error("{features} features exceed the exact enumeration limit of {limit}")]
    TooManyFeatures { features: usize, limit: usize },

    #[error("degenerate regression system")]
    Degenerate,

    #[error("all kernel weights are zero; kernel width too small")]
    ZeroKernelWeights,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("missing model bundle at {0}")]
    MissingModelBundle(PathBuf),

    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),

    #[error("unsupported format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    #[error("checksum mismatch for {0}")]
    Checksum(PathBuf),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable tag for CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::MissingColumn(_) => "missing_column",
            Error::NonNumeric { .. } => "non_numeric",
            Error::NonFinite { .. } => "non_finite",
            Error::UnknownLabel(_) => "unknown_label",
            Error::EmptyClass(_) => "empty_class",
            Error::InvalidGenotype(_) => "invalid_genotype",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::ZeroVariance(_) => "zero_variance",
            Error::ClassTooSmall { .. } => "class_too_small",
            Error::Config(_) => "config",
            Error::Hyperparameter { .. } => "hyperparameter",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Dimension { .. } => "dimension",
            Error::TaskFit { .. } => "task_fit",
            Error::NotTreeBased(_) => "not_tree_based",
            Error::TooManyFeatures { .. } => "too_many_features",
            Error::Degenerate => "degenerate",
            Error::ZeroKernelWeights => "zero_kernel_weights",
            Error::Empty(_) => "empty",
            Error::MissingModelBundle(_) => "missing_model_bundle",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::Version { .. } => "version",
            Error::Checksum(_) => "checksum",
        }
    }
}
