//! Model selection: seeded K-means initialization, the sparsity-aware BIC,
//! and the joint grid search over (g, lambda1, lambda2).

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::em::{adaptive_weights, em_fit, StopRule};
use crate::error::{Error, Result};
use crate::math::derive_seed;
use crate::model::{CovMode, FitResult, FitStatus, MixtureParams, PenaltyConfig, VARIANCE_FLOOR};

/// The (g, lambda1, lambda2) grid and the multi-start policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub g_values: Vec<usize>,
    pub lambda1_values: Vec<f64>,
    pub lambda2_values: Vec<f64>,
    pub n_starts: usize,
    pub seed: u64,
    /// Off by default: replace the paper-style effective parameter count with
    /// the corrected count (g-1) + #{mu != 0} + #{sigma2 != 1} for
    /// sensitivity analysis.
    pub use_corrected_df: bool,
}

impl GridSpec {
    pub fn new(
        g_values: Vec<usize>,
        lambda1_values: Vec<f64>,
        lambda2_values: Vec<f64>,
        n_starts: usize,
        seed: u64,
    ) -> Self {
        GridSpec {
            g_values,
            lambda1_values,
            lambda2_values,
            n_starts,
            seed,
            use_corrected_df: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.g_values.is_empty()
            || self.lambda1_values.is_empty()
            || self.lambda2_values.is_empty()
        {
            return Err(Error::Config("grid lists must be non-empty".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::Config("n_starts must be at least 1".into()));
        }
        let ascending = |xs: &[f64]| xs.windows(2).all(|w| w[0] < w[1]);
        if !self.g_values.windows(2).all(|w| w[0] < w[1])
            || !ascending(&self.lambda1_values)
            || !ascending(&self.lambda2_values)
        {
            return Err(Error::Config("grid lists must be strictly ascending".into()));
        }
        if self.g_values[0] == 0 {
            return Err(Error::Config("g must be positive".into()));
        }
        if self.lambda1_values[0] < 0.0 || self.lambda2_values[0] < 0.0 {
            return Err(Error::Config("lambda grids must be non-negative".into()));
        }
        Ok(())
    }
}

/// Default lambda grid: {0, 1, 2, 4, 8, 16, 32, 64} scaled by sqrt(n)/10,
/// spanning no shrinkage to full thresholding on standardized data.
pub fn default_lambda_grid(n: usize) -> Vec<f64> {
    let scale = (n as f64).sqrt() / 10.0;
    [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
        .iter()
        .map(|v| v * scale)
        .collect()
}

/// Outcome of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellStatus {
    Ok,
    AllStartsDegenerate,
}

/// One row of the BIC table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRow {
    pub g: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub bic: Option<f64>,
    pub d_e: Option<usize>,
    pub penalized_loglik: Option<f64>,
    pub status: CellStatus,
    /// Penalized log-likelihood of every start; None marks a degenerate or
    /// failed start. The reported fit maximizes this list.
    pub start_scores: Vec<Option<f64>>,
}

/// Best fit plus the full BIC table.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub best: FitResult,
    /// The winning (g, lambda1, lambda2).
    pub best_cell: (usize, f64, f64),
    pub best_bic: f64,
    pub table: Vec<CellRow>,
    /// For the adaptive pipeline: the first-stage table and winning cell.
    pub stage_one: Option<StageOneSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageOneSummary {
    pub best_cell: (usize, f64, f64),
    pub best_bic: f64,
    pub table: Vec<CellRow>,
}

/// Effective number of parameters: g + K + gK - 1 - q, where q counts the
/// (cluster, variable) pairs fully at the null value. Under the equal
/// covariance model the variances are unpenalized and common, so only the
/// mean condition applies there.
pub fn effective_df(params: &MixtureParams, tol_zero: f64) -> usize {
    let g = params.g;
    let k = params.n_vars();
    let q = (0..g)
        .flat_map(|i| (0..k).map(move |kk| (i, kk)))
        .filter(|&(i, kk)| {
            let mean_null = params.mu[[i, kk]].abs() <= tol_zero;
            match params.cov_mode {
                CovMode::Equal => mean_null,
                CovMode::Unequal => {
                    mean_null && (params.sigma2[[i, kk]] - 1.0).abs() <= tol_zero
                }
            }
        })
        .count();
    g + k + g * k - 1 - q
}

/// Corrected parameter count: (g - 1) free proportions plus the surviving
/// means and (in Unequal mode) surviving variances; in Equal mode the K
/// common variances are always free.
pub fn effective_df_corrected(params: &MixtureParams, tol_zero: f64) -> usize {
    let g = params.g;
    let k = params.n_vars();
    let live_means = params.mu.iter().filter(|m| m.abs() > tol_zero).count();
    let live_vars = match params.cov_mode {
        CovMode::Equal => k,
        CovMode::Unequal => params
            .sigma2
            .iter()
            .filter(|v| (**v - 1.0).abs() > tol_zero)
            .count(),
    };
    (g - 1) + live_means + live_vars
}

fn bic_value(loglik: f64, d_e: usize, n: usize) -> f64 {
    -2.0 * loglik + (n as f64).ln() * d_e as f64
}

/// BIC of a fit: -2 times the unpenalized log-likelihood at the penalized
/// estimate plus log(n) times the effective parameter count.
pub fn bic(fit: &FitResult, n: usize) -> Result<f64> {
    if fit.status == FitStatus::DegenerateCluster {
        return Err(Error::DegenerateFit);
    }
    Ok(bic_value(fit.loglik, effective_df(&fit.params, 0.0), n))
}

/// Lloyd's algorithm from g distinct seeded observations; returns mixture
/// parameters with proportions floored at 1/(2n), centroid means, and
/// within-cluster variances floored at the variance floor.
pub fn kmeans_init(data: &Dataset, g: usize, seed: u64) -> Result<MixtureParams> {
    let n = data.n();
    let k = data.n_vars();
    if g == 0 || g > n {
        return Err(Error::Config(format!("g = {g} out of range for n = {n}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, n, g);
    let mut centroids = Array2::zeros((g, k));
    for (i, idx) in chosen.iter().enumerate() {
        centroids.row_mut(i).assign(&data.values.row(idx));
    }

    let dist2 = |row: ndarray::ArrayView1<f64>, c: ndarray::ArrayView1<f64>| -> f64 {
        row.iter().zip(c.iter()).map(|(a, b)| (a - b).powi(2)).sum()
    };

    let assign = |centroids: &Array2<f64>| -> (Vec<usize>, Vec<f64>) {
        let mut labels = vec![0usize; n];
        let mut dists = vec![0.0f64; n];
        for (j, row) in data.values.rows().into_iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = dist2(row, centroids.row(0));
            for i in 1..g {
                let d = dist2(row, centroids.row(i));
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            labels[j] = best;
            dists[j] = best_d;
        }
        (labels, dists)
    };

    let (mut labels, mut dists) = assign(&centroids);
    let mut reseeded = false;
    for _ in 0..100 {
        // handle empty clusters before recomputing centroids
        let mut counts = vec![0usize; g];
        for &l in &labels {
            counts[l] += 1;
        }
        if counts.iter().any(|&c| c == 0) {
            if reseeded {
                return Err(Error::InitFailure);
            }
            reseeded = true;
            let mut taken = vec![false; n];
            for i in 0..g {
                if counts[i] > 0 {
                    continue;
                }
                // move this centroid onto the farthest unclaimed point
                let far = (0..n)
                    .filter(|&j| !taken[j])
                    .max_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap())
                    .ok_or(Error::InitFailure)?;
                taken[far] = true;
                centroids.row_mut(i).assign(&data.values.row(far));
            }
            let (l2, d2) = assign(&centroids);
            labels = l2;
            dists = d2;
            let mut counts2 = vec![0usize; g];
            for &l in &labels {
                counts2[l] += 1;
            }
            if counts2.iter().any(|&c| c == 0) {
                return Err(Error::InitFailure);
            }
            continue;
        }

        let mut new_centroids = Array2::zeros((g, k));
        for (j, &l) in labels.iter().enumerate() {
            let mut row = new_centroids.row_mut(l);
            row += &data.values.row(j);
        }
        for i in 0..g {
            let mut row = new_centroids.row_mut(i);
            row /= counts[i] as f64;
        }
        let (new_labels, new_dists) = assign(&new_centroids);
        let stable = new_labels == labels;
        centroids = new_centroids;
        labels = new_labels;
        dists = new_dists;
        if stable {
            break;
        }
    }

    let mut counts = vec![0usize; g];
    for &l in &labels {
        counts[l] += 1;
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::InitFailure);
    }

    let floor = 1.0 / (2.0 * n as f64);
    let mut pi: Array1<f64> = counts
        .iter()
        .map(|&c| (c as f64 / n as f64).max(floor))
        .collect();
    let total = pi.sum();
    pi.mapv_inplace(|p| p / total);

    let mut sigma2 = Array2::zeros((g, k));
    for (j, &l) in labels.iter().enumerate() {
        let row = data.values.row(j);
        let c = centroids.row(l);
        for kk in 0..k {
            sigma2[[l, kk]] += (row[kk] - c[kk]).powi(2);
        }
    }
    for i in 0..g {
        let mut row = sigma2.row_mut(i);
        row /= counts[i] as f64;
        row.mapv_inplace(|v| v.max(VARIANCE_FLOOR));
    }

    Ok(MixtureParams::new(pi, centroids, sigma2, CovMode::Unequal))
}

/// Resize a weight matrix to `g` rows by repeating the last row (or
/// truncating). Cluster labels carry no identity across different g, so the
/// pilot fit's per-variable profile is broadcast.
fn fit_weights_to_g(w: &Array2<f64>, g: usize) -> Array2<f64> {
    if w.nrows() == g {
        return w.clone();
    }
    let k = w.ncols();
    Array2::from_shape_fn((g, k), |(i, kk)| w[[i.min(w.nrows() - 1), kk]])
}

fn cell_penalty(template: &PenaltyConfig, lambda1: f64, lambda2: f64, g: usize) -> PenaltyConfig {
    let mut p = template.clone();
    p.lambda1 = lambda1;
    p.lambda2 = lambda2;
    if let Some(w) = &template.mean_weights {
        p.mean_weights = Some(fit_weights_to_g(w, g));
    }
    if let Some(v) = &template.var_weights {
        p.var_weights = Some(fit_weights_to_g(v, g));
    }
    p
}

/// Exhaustive search over the grid: every cell runs `n_starts` seeded
/// K-means-initialized EM fits, keeps the best penalized log-likelihood
/// among non-degenerate starts, and the cell with minimum BIC wins. Ties
/// break toward larger lambda1, then larger lambda2, then smaller g.
pub fn grid_search(
    data: &Dataset,
    spec: &GridSpec,
    penalty_template: &PenaltyConfig,
    cov_mode: CovMode,
    stop: &StopRule,
) -> Result<SelectionResult> {
    spec.validate()?;
    if cov_mode == CovMode::Equal && spec.lambda2_values.iter().any(|&l| l > 0.0) {
        return Err(Error::Config(
            "the equal-covariance model penalizes means only; use a lambda2 grid of {0}".into(),
        ));
    }
    penalty_template.validate(
        penalty_template
            .mean_weights
            .as_ref()
            .map(|w| w.nrows())
            .unwrap_or(1),
        data.n_vars(),
    )?;

    let cells: Vec<(usize, f64, f64)> = spec
        .g_values
        .iter()
        .flat_map(|&g| {
            spec.lambda1_values.iter().flat_map(move |&l1| {
                spec.lambda2_values.iter().map(move |&l2| (g, l1, l2))
            })
        })
        .collect();

    let n = data.n();
    let outcomes: Vec<(CellRow, Option<FitResult>)> = cells
        .par_iter()
        .enumerate()
        .map(|(cell_idx, &(g, l1, l2))| {
            let penalty = cell_penalty(penalty_template, l1, l2, g);
            let mut best: Option<FitResult> = None;
            let mut scores: Vec<Option<f64>> = Vec::with_capacity(spec.n_starts);
            for start in 0..spec.n_starts {
                let s = derive_seed(spec.seed, cell_idx as u64, start as u64);
                let fit = kmeans_init(data, g, s)
                    .and_then(|init| em_fit(data, g, &penalty, cov_mode, &init, stop));
                match fit {
                    Ok(f) if f.status != FitStatus::DegenerateCluster
                        && !f.variance_floor_hit =>
                    {
                        scores.push(Some(f.penalized_loglik));
                        let better = best
                            .as_ref()
                            .map(|b| f.penalized_loglik > b.penalized_loglik)
                            .unwrap_or(true);
                        if better {
                            best = Some(f);
                        }
                    }
                    _ => scores.push(None),
                }
            }
            let row = match &best {
                Some(f) => {
                    let d_e = if spec.use_corrected_df {
                        effective_df_corrected(&f.params, 0.0)
                    } else {
                        effective_df(&f.params, 0.0)
                    };
                    CellRow {
                        g,
                        lambda1: l1,
                        lambda2: l2,
                        bic: Some(bic_value(f.loglik, d_e, n)),
                        d_e: Some(d_e),
                        penalized_loglik: Some(f.penalized_loglik),
                        status: CellStatus::Ok,
                        start_scores: scores,
                    }
                }
                None => CellRow {
                    g,
                    lambda1: l1,
                    lambda2: l2,
                    bic: None,
                    d_e: None,
                    penalized_loglik: None,
                    status: CellStatus::AllStartsDegenerate,
                    start_scores: scores,
                },
            };
            (row, best)
        })
        .collect();

    let mut best_idx: Option<usize> = None;
    for (idx, (row, _)) in outcomes.iter().enumerate() {
        let Some(b) = row.bic else { continue };
        let better = match best_idx {
            None => true,
            Some(cur) => {
                let cur_row = &outcomes[cur].0;
                let cur_bic = cur_row.bic.unwrap();
                if b != cur_bic {
                    b < cur_bic
                } else {
                    // sparser (larger lambdas), then simpler (smaller g)
                    (row.lambda1, row.lambda2, std::cmp::Reverse(row.g))
                        > (cur_row.lambda1, cur_row.lambda2, std::cmp::Reverse(cur_row.g))
                }
            }
        };
        if better {
            best_idx = Some(idx);
        }
    }

    let best_idx = best_idx.ok_or(Error::GlobalFailure)?;
    let mut outcomes = outcomes;
    let best_fit = outcomes[best_idx].1.take().unwrap();
    let best_row = &outcomes[best_idx].0;
    let best_cell = (best_row.g, best_row.lambda1, best_row.lambda2);
    let best_bic = best_row.bic.unwrap();
    let table = outcomes.into_iter().map(|(row, _)| row).collect();

    Ok(SelectionResult {
        best: best_fit,
        best_cell,
        best_bic,
        table,
        stage_one: None,
    })
}

/// Two-stage adaptive fit: a plain scheme-one grid search, then a second
/// search with per-parameter weights 1/|mu| and 1/|sigma2 - 1| computed from
/// the first winner. Parameters the pilot fit nulled stay pinned at their
/// null values through infinite weights.
pub fn adaptive_pipeline(
    data: &Dataset,
    spec: &GridSpec,
    stop: &StopRule,
) -> Result<SelectionResult> {
    let template = PenaltyConfig::new(0.0, 0.0, crate::model::VarianceScheme::VarMinusOne);
    let stage1 = grid_search(data, spec, &template, CovMode::Unequal, stop)?;

    let (w, v) = adaptive_weights(&stage1.best.params, 1.0);
    let weighted = PenaltyConfig::new(0.0, 0.0, crate::model::VarianceScheme::VarMinusOne)
        .with_weights(w, v);
    let mut stage2 = grid_search(data, spec, &weighted, CovMode::Unequal, stop)?;
    stage2.stage_one = Some(StageOneSummary {
        best_cell: stage1.best_cell,
        best_bic: stage1.best_bic,
        table: stage1.table,
    });
    Ok(stage2)
}
