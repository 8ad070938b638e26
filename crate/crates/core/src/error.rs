//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by data ingestion, model fitting, and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column '{name}' in input")]
    MissingColumn { name: String },

    #[error("exposure not binary at row {row}")]
    NonBinaryExposure { row: usize },

    #[error("non-numeric value '{value}' at row {row}, column '{column}'")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("sample has {n} row(s); at least 2 are required")]
    TooFewRows { n: usize },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("outcome is not finite at row {row}")]
    NonFiniteOutcome { row: usize },

    #[error("degenerate exposure proportion: all subjects {}",
            if *.all_exposed { "exposed" } else { "unexposed" })]
    DegenerateExposure { all_exposed: bool },

    #[error("outcome is constant; auto scaling to [0,1] is undefined")]
    ConstantOutcome,

    #[error("outcome {value} at row {row} violates scale bounds [{lower}, {upper}]")]
    OutcomeOutOfBounds {
        row: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("k_n value {value} is outside [0,1] but is interpreted as a proportion")]
    KnOutOfRange { value: f64 },

    #[error("invalid model or intervention specification: {message}")]
    InvalidSpec { message: String },

    #[error("design matrix is rank deficient; column '{column}' is collinear with earlier columns")]
    RankDeficient { column: String },

    #[error("complete separation detected in propensity/outcome fit")]
    Separation,

    #[error("{what} did not converge within {iterations} iterations{detail}")]
    NonConvergence {
        what: String,
        iterations: usize,
        detail: String,
    },

    #[error("marginal probabilities have length {got}, sample has {expected} rows")]
    MarginalLengthMismatch { got: usize, expected: usize },

    #[error("population-average variance is unavailable for '{intervention}': the individual-level intervention probabilities depend on other subjects")]
    PopulationVarianceUnavailable { intervention: String },

    #[error("singular weighted system in MSM fit (J rows may be fewer than design columns)")]
    SingularSystem,

    #[error("group '{group}' is missing modifier '{modifier}'")]
    MissingModifier { group: String, modifier: String },

    #[error("simulation cell aborted: {failures} replicate failures exceeded the 1% cap ({cap}) out of {replicates}")]
    TooManyFailures {
        failures: usize,
        cap: usize,
        replicates: usize,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
