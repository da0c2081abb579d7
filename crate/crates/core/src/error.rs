use thiserror::Error;

/// Errors surfaced by the clustering library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} is constant; cannot standardize")]
    ConstantColumn(usize),

    #[error("non-finite value at row {row}, column {col}")]
    InvalidValue { row: usize, col: usize },

    #[error("need at least two observations, got {0}")]
    TooFewObservations(usize),

    #[error("responsibility mass is (near-)zero; cluster is empty")]
    EmptyCluster,

    #[error("infinite penalty weight on a non-null parameter (cluster {cluster}, variable {variable})")]
    InfiniteWeightConflict { cluster: usize, variable: usize },

    #[error("{what} did not converge within {limit} iterations")]
    NoConvergence { what: &'static str, limit: usize },

    #[error("fit ended with a degenerate cluster; BIC undefined")]
    DegenerateFit,

    #[error("k-means initialization failed: empty cluster after reseeding")]
    InitFailure,

    #[error("every grid cell failed; no model selected")]
    GlobalFailure,

    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
