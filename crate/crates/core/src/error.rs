use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the pipeline.
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
    #[error("config error: {0}")]
    Config(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("column `{0}` is missing from the header")]
    MissingColumn(String),
    #[error("column `{0}` appears more than once")]
    DuplicateColumn(String),
    #[error("parse error at row {row}, column `{column}`: cannot parse {value:?} as {expected}")]
    ParseError {
        row: usize,
        column: String,
        value: String,
        expected: &'static str,
    },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{column}` has role {actual}, expected {expected}")]
    WrongRole {
        column: String,
        expected: &'static str,
        actual: &'static str,
    },
    #[error("target column has not been binarized")]
    TargetNotBinary,

    #[error("target value {0:?} is neither in the positive nor the negative set")]
    TargetUnmappable(String),
    #[error("invalid cleaning plan: {0}")]
    InvalidPlan(String),
    #[error("partition `{0}` would be empty")]
    EmptyPartition(&'static str),
    #[error("date column `{0}` has missing values")]
    MissingDates(String),
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),

    #[error("target is degenerate (all {0})")]
    DegenerateTarget(&'static str),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid encoder parameter: {0}")]
    InvalidEncoderParam(String),
    #[error("encoder produced a non-finite value for column `{column}`, category {category:?}")]
    NonFiniteEncoding { column: String, category: String },

    #[error("only {minority} minority rows, need more than k_neighbors = {k}")]
    TooFewMinority { minority: usize, k: usize },
    #[error("labels contain a single class")]
    SingleClass,
    #[error("invalid resample plan: {0}")]
    InvalidResamplePlan(String),

    #[error("feature matrix contains a non-finite value at row {row}, feature {feature}")]
    NonFiniteFeature { row: usize, feature: usize },
    #[error("width mismatch: expected {expected} features, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("need at least {0} rows to fit")]
    TooFewRows(usize),
    #[error("all ensemble member performances are zero")]
    AllZeroPerformance,
    #[error("invalid ensemble weights: {0}")]
    InvalidWeights(String),

    #[error("no positive labels")]
    NoPositives,
    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("invalid k: {0}")]
    InvalidK(f64),

    #[error("every candidate failed")]
    AllCandidatesFailed,
    #[error("invalid search space: {0}")]
    InvalidSearchSpace(String),

    #[error("perturbed samples have zero variance in every feature")]
    DegeneratePerturbation,
    #[error("invalid surrogate config: {0}")]
    InvalidSurrogateConfig(String),
    #[error("empty background set")]
    EmptyBackground,

    #[error("cohort {column}={value} not present")]
    UnknownCohort { column: String, value: String },

    #[error("prevalence {0} cannot be reached with the configured coefficients")]
    InfeasiblePrevalence(f64),
    #[error("invalid generator config: {0}")]
    InvalidGenConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
