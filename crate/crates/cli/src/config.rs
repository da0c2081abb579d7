use serde::{Deserialize, Serialize};

/// How the input file is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Orientation {
    /// Rows are observations, columns are variables (the internal layout).
    #[clap(name = "rows")]
    RowsAreObservations,
    /// Columns are observations (typical for genes x samples expression files).
    #[clap(name = "cols")]
    ColumnsAreObservations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum CovModeArg {
    Equal,
    Unequal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum SchemeArg {
    /// Penalize |sigma^2 - 1|.
    Var1,
    /// Penalize |log sigma^2|.
    Logvar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum GroupTarget {
    Means,
    Variances,
    Both,
}

/// The fully resolved settings of a `fit` run; embedded verbatim in every
/// output file so a run can be reproduced from any of its artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: String,
    pub orientation: Orientation,
    pub cov_mode: CovModeArg,
    pub scheme: SchemeArg,
    pub adaptive: bool,
    pub groups_file: Option<String>,
    pub group_target: GroupTarget,
    pub g_values: Vec<usize>,
    pub lambda1_grid: Vec<f64>,
    pub lambda2_grid: Vec<f64>,
    pub n_starts: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub preprocess: bool,
    pub truncate_low: f64,
    pub truncate_high: f64,
    pub filter_ratio: f64,
    pub filter_span: f64,
    pub top_k_variance: usize,
    pub output_dir: String,
}

impl RunConfig {
    pub fn to_core(&self) -> (pmclust_core::CovMode, pmclust_core::VarianceScheme) {
        let cov = match self.cov_mode {
            CovModeArg::Equal => pmclust_core::CovMode::Equal,
            CovModeArg::Unequal => pmclust_core::CovMode::Unequal,
        };
        let scheme = match self.scheme {
            SchemeArg::Var1 => pmclust_core::VarianceScheme::VarMinusOne,
            SchemeArg::Logvar => pmclust_core::VarianceScheme::LogVar,
        };
        (cov, scheme)
    }
}
