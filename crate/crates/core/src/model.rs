//! Mixture parameters, penalty configuration, and the penalized
//! log-likelihood objective.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::logsumexp;

/// Smallest admissible variance. Updates that would fall below are clamped.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Responsibility mass below which a cluster is considered degenerate.
pub const DEGENERACY_EPS: f64 = 1e-8;

/// Covariance structure of the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovMode {
    /// One diagonal covariance shared by all clusters; only means are penalized.
    Equal,
    /// Cluster-specific diagonal covariances; means and variances are penalized.
    Unequal,
}

/// How variances are shrunk toward 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceScheme {
    /// Penalize |sigma^2 - 1|.
    VarMinusOne,
    /// Penalize |log sigma^2|.
    LogVar,
}

/// A partition of the K variables into M disjoint groups.
///
/// Group ids are 0-based internally. A group of size one behaves exactly
/// like an ungrouped variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grouping {
    /// For each variable, the id of its group (0..M).
    pub group_of: Vec<usize>,
    /// Number of groups.
    pub m: usize,
    /// Size of each group; sums to K.
    pub sizes: Vec<usize>,
    /// Apply the block penalty to mean vectors.
    pub group_means: bool,
    /// Apply the block penalty to variance vectors.
    pub group_variances: bool,
}

impl Grouping {
    pub fn new(group_of: Vec<usize>, group_means: bool, group_variances: bool) -> Result<Self> {
        if group_of.is_empty() {
            return Err(Error::Config("grouping covers no variables".into()));
        }
        let m = group_of.iter().copied().max().unwrap() + 1;
        let mut sizes = vec![0usize; m];
        for &g in &group_of {
            sizes[g] += 1;
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("grouping has an empty group id".into()));
        }
        Ok(Grouping {
            group_of,
            m,
            sizes,
            group_means,
            group_variances,
        })
    }

    /// Every variable in its own group (the degenerate grouping).
    pub fn singletons(k: usize, group_means: bool, group_variances: bool) -> Self {
        Grouping {
            group_of: (0..k).collect(),
            m: k,
            sizes: vec![1; k],
            group_means,
            group_variances,
        }
    }

    /// Variable indices of group `m`, in ascending order.
    pub fn members(&self, m: usize) -> Vec<usize> {
        self.group_of
            .iter()
            .enumerate()
            .filter(|(_, &g)| g == m)
            .map(|(k, _)| k)
            .collect()
    }

    /// Member lists for every group, built in one pass.
    pub fn member_lists(&self) -> Vec<Vec<usize>> {
        let mut lists: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (k, &g) in self.group_of.iter().enumerate() {
            lists[g].push(k);
        }
        lists
    }
}

/// Parameters of a g-component diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureParams {
    /// Number of components.
    pub g: usize,
    /// Mixing proportions, length g.
    pub pi: Array1<f64>,
    /// Cluster means, g x K.
    pub mu: Array2<f64>,
    /// Cluster variances, g x K. In Equal mode every row is identical.
    pub sigma2: Array2<f64>,
    pub cov_mode: CovMode,
}

impl MixtureParams {
    pub fn new(pi: Array1<f64>, mu: Array2<f64>, sigma2: Array2<f64>, cov_mode: CovMode) -> Self {
        let g = pi.len();
        MixtureParams {
            g,
            pi,
            mu,
            sigma2,
            cov_mode,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.mu.ncols()
    }

    /// Check the structural invariants; used by tests and at API boundaries.
    pub fn validate(&self) -> Result<()> {
        if self.pi.len() != self.g || self.mu.nrows() != self.g || self.sigma2.nrows() != self.g {
            return Err(Error::Config("parameter dimensions disagree on g".into()));
        }
        if self.mu.ncols() != self.sigma2.ncols() {
            return Err(Error::Config("mu and sigma2 disagree on K".into()));
        }
        if self.pi.iter().any(|&p| p < 0.0) || (self.pi.sum() - 1.0).abs() > 1e-12 {
            return Err(Error::Config("pi is not a probability vector".into()));
        }
        if self.sigma2.iter().any(|&v| v < VARIANCE_FLOOR) {
            return Err(Error::Config("a variance is below the floor".into()));
        }
        if self.cov_mode == CovMode::Equal {
            let first = self.sigma2.row(0);
            for i in 1..self.g {
                if self.sigma2.row(i) != first {
                    return Err(Error::Config("Equal mode requires identical variance rows".into()));
                }
            }
        }
        Ok(())
    }

    /// Pool variance rows into a single common row (pi-weighted), turning the
    /// parameters into a valid Equal-mode value.
    pub fn into_equal_mode(mut self) -> Self {
        let k = self.n_vars();
        let mut pooled = Array1::<f64>::zeros(k);
        for i in 0..self.g {
            let w = self.pi[i];
            pooled.scaled_add(w, &self.sigma2.row(i));
        }
        pooled.mapv_inplace(|v| v.max(VARIANCE_FLOOR));
        for i in 0..self.g {
            self.sigma2.row_mut(i).assign(&pooled);
        }
        self.cov_mode = CovMode::Equal;
        self
    }
}

/// Penalty strengths, variance scheme, optional adaptive weights, optional
/// variable grouping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub scheme: VarianceScheme,
    /// Per-parameter mean-penalty weights (g x K); entries may be infinite.
    pub mean_weights: Option<Array2<f64>>,
    /// Per-parameter variance-penalty weights (g x K); entries may be infinite.
    pub var_weights: Option<Array2<f64>>,
    pub grouping: Option<Grouping>,
}

impl PenaltyConfig {
    pub fn new(lambda1: f64, lambda2: f64, scheme: VarianceScheme) -> Self {
        PenaltyConfig {
            lambda1,
            lambda2,
            scheme,
            mean_weights: None,
            var_weights: None,
            grouping: None,
        }
    }

    pub fn with_weights(mut self, mean_weights: Array2<f64>, var_weights: Array2<f64>) -> Self {
        self.mean_weights = Some(mean_weights);
        self.var_weights = Some(var_weights);
        self
    }

    pub fn with_grouping(mut self, grouping: Grouping) -> Self {
        self.grouping = Some(grouping);
        self
    }

    /// Effective lambda1 for parameter (i, k): lambda1 times its weight.
    pub fn lambda1_eff(&self, i: usize, k: usize) -> f64 {
        match &self.mean_weights {
            Some(w) => self.lambda1 * w[[i, k]],
            None => self.lambda1,
        }
    }

    /// Effective lambda2 for parameter (i, k).
    pub fn lambda2_eff(&self, i: usize, k: usize) -> f64 {
        match &self.var_weights {
            Some(v) => self.lambda2 * v[[i, k]],
            None => self.lambda2,
        }
    }

    fn weights_valid(w: &Array2<f64>) -> bool {
        w.iter().all(|&x| !x.is_nan() && x >= 0.0)
    }

    pub fn validate(&self, g: usize, k: usize) -> Result<()> {
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(Error::Config("negative penalty strength".into()));
        }
        for w in [&self.mean_weights, &self.var_weights].into_iter().flatten() {
            if w.dim() != (g, k) {
                return Err(Error::Config("weight matrix dimensions do not match (g, K)".into()));
            }
            if !Self::weights_valid(w) {
                return Err(Error::Config("weights must be non-negative and not NaN".into()));
            }
        }
        if let Some(gr) = &self.grouping {
            if gr.group_of.len() != k {
                return Err(Error::Config("grouping does not cover all variables".into()));
            }
            if gr.sizes.iter().sum::<usize>() != k {
                return Err(Error::Config("group sizes do not sum to K".into()));
            }
            if gr.group_variances && self.scheme == VarianceScheme::LogVar {
                return Err(Error::Config(
                    "grouped variances are only defined for the var-minus-one scheme".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Posterior membership probabilities, n x g. Rows sum to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Responsibilities {
    pub tau: Array2<f64>,
}

impl Responsibilities {
    /// Column sums: the expected number of observations per cluster.
    pub fn cluster_masses(&self) -> Array1<f64> {
        self.tau.sum_axis(ndarray::Axis(0))
    }

    /// Hard assignment of each observation (argmax over clusters, 0-based).
    pub fn hard_labels(&self) -> Vec<usize> {
        self.tau
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap_or(0)
            })
            .collect()
    }
}

/// Why an EM run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitStatus {
    Converged,
    MaxIterations,
    DegenerateCluster,
}

/// A converged (or aborted) EM fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub params: MixtureParams,
    pub tau: Responsibilities,
    pub penalized_loglik: f64,
    /// Unpenalized mixture log-likelihood at the penalized estimate.
    pub loglik: f64,
    /// Penalized log-likelihood after each EM pass; entry 0 is the value at
    /// the initial parameters.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub status: FitStatus,
    /// A variance update fell below the floor and was clamped: the fit sits
    /// on a degenerate likelihood spike and is excluded from model selection.
    pub variance_floor_hit: bool,
    pub zero_mean_count: usize,
    pub unit_variance_count: usize,
    /// Variables that cancel out of the posterior: mean 0 in every cluster,
    /// and (in Unequal mode) variance exactly 1 in every cluster. In Equal
    /// mode the common variance cancels regardless of its value, so only the
    /// means matter.
    pub noise_variable_indices: BTreeSet<usize>,
}

/// The set of noise variables implied by `params`; see `FitResult`.
pub fn noise_variables(params: &MixtureParams) -> BTreeSet<usize> {
    let k = params.n_vars();
    (0..k)
        .filter(|&kk| {
            (0..params.g).all(|i| {
                let mean_null = params.mu[[i, kk]] == 0.0;
                match params.cov_mode {
                    CovMode::Equal => mean_null,
                    CovMode::Unequal => mean_null && params.sigma2[[i, kk]] == 1.0,
                }
            })
        })
        .collect()
}

/// Log density of one observation under a single diagonal Gaussian component:
/// -(K/2) log 2pi - (1/2) sum log sigma^2_k - (1/2) sum (x_k - mu_k)^2 / sigma^2_k.
pub fn log_component_density(
    x: ArrayView1<f64>,
    mu_i: ArrayView1<f64>,
    sigma2_i: ArrayView1<f64>,
) -> f64 {
    let k = x.len() as f64;
    let mut log_det = 0.0;
    let mut quad = 0.0;
    for ((&xv, &m), &v) in x.iter().zip(mu_i.iter()).zip(sigma2_i.iter()) {
        log_det += v.ln();
        let d = xv - m;
        quad += d * d / v;
    }
    -0.5 * (k * (2.0 * PI).ln() + log_det + quad)
}

/// Value of the active penalty at `params`.
///
/// Ungrouped terms are weighted L1 sums; grouped terms are sqrt(k_m) times
/// the block L2 norm. An infinite weight contributes 0 when its parameter
/// sits exactly at the null value (0 for means, 1 for variances) and is an
/// error otherwise.
pub fn penalty_value(params: &MixtureParams, penalty: &PenaltyConfig) -> Result<f64> {
    let g = params.g;
    let k = params.n_vars();
    penalty.validate(g, k)?;

    let grouping = penalty.grouping.as_ref();
    let group_means = grouping.map(|gr| gr.group_means).unwrap_or(false);
    let group_variances = grouping.map(|gr| gr.group_variances).unwrap_or(false);

    let mut total = 0.0;

    if group_means {
        let gr = grouping.unwrap();
        for i in 0..g {
            for m in 0..gr.m {
                let norm: f64 = gr
                    .members(m)
                    .iter()
                    .map(|&kk| params.mu[[i, kk]].powi(2))
                    .sum::<f64>()
                    .sqrt();
                total += penalty.lambda1 * (gr.sizes[m] as f64).sqrt() * norm;
            }
        }
    } else {
        for i in 0..g {
            for kk in 0..k {
                let w = penalty.lambda1_eff(i, kk);
                let term = params.mu[[i, kk]].abs();
                if w.is_infinite() {
                    if term != 0.0 {
                        return Err(Error::InfiniteWeightConflict {
                            cluster: i,
                            variable: kk,
                        });
                    }
                } else {
                    total += w * term;
                }
            }
        }
    }

    if group_variances {
        let gr = grouping.unwrap();
        for i in 0..g {
            for m in 0..gr.m {
                let norm: f64 = gr
                    .members(m)
                    .iter()
                    .map(|&kk| (params.sigma2[[i, kk]] - 1.0).powi(2))
                    .sum::<f64>()
                    .sqrt();
                total += penalty.lambda2 * (gr.sizes[m] as f64).sqrt() * norm;
            }
        }
    } else {
        for i in 0..g {
            for kk in 0..k {
                let w = penalty.lambda2_eff(i, kk);
                let term = match penalty.scheme {
                    VarianceScheme::VarMinusOne => (params.sigma2[[i, kk]] - 1.0).abs(),
                    VarianceScheme::LogVar => params.sigma2[[i, kk]].ln().abs(),
                };
                if w.is_infinite() {
                    if term != 0.0 {
                        return Err(Error::InfiniteWeightConflict {
                            cluster: i,
                            variable: kk,
                        });
                    }
                } else {
                    total += w * term;
                }
            }
        }
    }

    Ok(total)
}

/// Per-observation log mixture densities: logsumexp over components of
/// log pi_i + log f_i(x_j). Components with pi_i = 0 are excluded.
pub fn log_mixture_rows(data: &Dataset, params: &MixtureParams) -> Array1<f64> {
    let n = data.n();
    let g = params.g;
    let lw = log_weighted_densities(data, params);
    let mut out = Array1::zeros(n);
    let mut buf = vec![0.0; g];
    for j in 0..n {
        buf.clear();
        buf.extend(lw.row(j).iter().copied());
        out[j] = logsumexp(&buf);
    }
    out
}

/// Matrix of log pi_i + log f_i(x_j), n x g; -inf where pi_i = 0.
pub(crate) fn log_weighted_densities(data: &Dataset, params: &MixtureParams) -> Array2<f64> {
    let n = data.n();
    let k = data.n_vars();
    let g = params.g;
    let mut lw = Array2::zeros((n, g));
    for i in 0..g {
        let log_pi = if params.pi[i] > 0.0 {
            params.pi[i].ln()
        } else {
            f64::NEG_INFINITY
        };
        if log_pi == f64::NEG_INFINITY {
            lw.column_mut(i).fill(f64::NEG_INFINITY);
            continue;
        }
        let mu_i = params.mu.row(i);
        let s2_i = params.sigma2.row(i);
        let log_det: f64 = s2_i.iter().map(|v| v.ln()).sum();
        let base = log_pi - 0.5 * (k as f64 * (2.0 * PI).ln() + log_det);
        let inv: Vec<f64> = s2_i.iter().map(|v| 1.0 / v).collect();
        for (j, row) in data.values.rows().into_iter().enumerate() {
            let mut quad = 0.0;
            for ((&xv, &m), &iv) in row.iter().zip(mu_i.iter()).zip(inv.iter()) {
                let d = xv - m;
                quad += d * d * iv;
            }
            lw[[j, i]] = base - 0.5 * quad;
        }
    }
    lw
}

/// Unpenalized mixture log-likelihood of the data.
pub fn mixture_loglik(data: &Dataset, params: &MixtureParams) -> f64 {
    log_mixture_rows(data, params).sum()
}

/// The objective every fit maximizes: mixture log-likelihood minus penalty.
pub fn penalized_loglik(
    data: &Dataset,
    params: &MixtureParams,
    penalty: &PenaltyConfig,
) -> Result<f64> {
    Ok(mixture_loglik(data, params) - penalty_value(params, penalty)?)
}
