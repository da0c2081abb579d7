//! The EM/GEM loop: E-step responsibilities and closed-form penalized
//! M-step updates for mixing proportions, means and variances.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grouped::{update_group_mean, update_group_variance, GroupBlockInput};
use crate::math::logsumexp;
use crate::model::{
    log_weighted_densities, mixture_loglik, noise_variables, penalized_loglik, CovMode, FitResult,
    FitStatus, MixtureParams, PenaltyConfig, Responsibilities, DEGENERACY_EPS, VARIANCE_FLOOR,
};

/// Stopping rule: relative change of the penalized log-likelihood.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StopRule {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

impl StopRule {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config("stop rule requires tol > 0 and max_iter >= 1".into()));
        }
        Ok(())
    }
}

/// Per-cluster sufficient statistics of one E-step.
#[derive(Debug, Clone)]
pub struct SuffStats {
    /// Responsibility mass per cluster, length g.
    pub tau_sums: Array1<f64>,
    /// Responsibility-weighted data sums, g x K.
    pub weighted_x: Array2<f64>,
    /// Responsibility-weighted squared residuals against the given means, g x K.
    pub weighted_sq: Array2<f64>,
}

impl SuffStats {
    pub fn compute(data: &Dataset, tau: &Responsibilities, mu: &Array2<f64>) -> Self {
        let tau_sums = tau.cluster_masses();
        let weighted_x = tau.tau.t().dot(&data.values);
        let weighted_sq = weighted_residuals(data, tau, mu);
        SuffStats {
            tau_sums,
            weighted_x,
            weighted_sq,
        }
    }
}

/// Sum_j tau_ij (x_jk - mu_ik)^2 for every (i, k), accumulated directly to
/// avoid cancellation.
pub(crate) fn weighted_residuals(
    data: &Dataset,
    tau: &Responsibilities,
    mu: &Array2<f64>,
) -> Array2<f64> {
    let g = mu.nrows();
    let k = mu.ncols();
    let mut out = Array2::zeros((g, k));
    for i in 0..g {
        let mu_i = mu.row(i);
        let mut acc = vec![0.0f64; k];
        for (j, row) in data.values.rows().into_iter().enumerate() {
            let w = tau.tau[[j, i]];
            if w == 0.0 {
                continue;
            }
            for (slot, (&x, &m)) in acc.iter_mut().zip(row.iter().zip(mu_i.iter())) {
                let d = x - m;
                *slot += w * d * d;
            }
        }
        out.row_mut(i).assign(&Array1::from(acc));
    }
    out
}

/// Posterior membership probabilities via log densities and logsumexp;
/// every row sums to one.
pub fn e_step(data: &Dataset, params: &MixtureParams) -> Responsibilities {
    let mut tau = log_weighted_densities(data, params);
    for mut row in tau.rows_mut() {
        let lse = logsumexp(row.as_slice().unwrap());
        row.mapv_inplace(|v| (v - lse).exp());
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
    Responsibilities { tau }
}

/// Mixing proportions: column means of the responsibility matrix.
pub fn update_pi(tau: &Responsibilities) -> Array1<f64> {
    let n = tau.tau.nrows() as f64;
    tau.cluster_masses() / n
}

/// Soft-thresholded mean update from precomputed sums:
/// s = sum tau x, t = sum tau.
pub(crate) fn mean_from_sums(s: f64, t: f64, sigma2: f64, lambda1_eff: f64) -> f64 {
    if lambda1_eff.is_infinite() {
        return 0.0;
    }
    if lambda1_eff == 0.0 {
        return s / t;
    }
    let threshold = lambda1_eff * sigma2;
    if s.abs() <= threshold {
        0.0
    } else {
        (s / t) * (1.0 - threshold / s.abs())
    }
}

/// Penalized mean update for one (cluster, variable) coordinate. Shrinks the
/// weighted mean toward zero and lands exactly on zero past the threshold.
pub fn update_mean(
    tau_i: &[f64],
    x_col: &[f64],
    sigma2_ik: f64,
    lambda1_eff: f64,
) -> Result<f64> {
    let t: f64 = tau_i.iter().sum();
    if t <= DEGENERACY_EPS {
        return Err(Error::EmptyCluster);
    }
    let s: f64 = tau_i.iter().zip(x_col.iter()).map(|(&w, &x)| w * x).sum();
    Ok(mean_from_sums(s, t, sigma2_ik, lambda1_eff))
}

/// Common-variance update for the equal-covariance model:
/// sigma2_k = sum_i sum_j tau_ij (x_jk - mu_ik)^2 / n, floored.
pub fn update_common_variance(
    tau: &Responsibilities,
    data: &Dataset,
    mu: &Array2<f64>,
) -> Array1<f64> {
    let n = data.n() as f64;
    let res = weighted_residuals(data, tau, mu);
    let mut common = res.sum_axis(ndarray::Axis(0)) / n;
    common.mapv_inplace(|v| v.max(VARIANCE_FLOOR));
    common
}

fn scheme_one_objective(x: f64, b: f64, c: f64, lambda2: f64) -> f64 {
    -b * x.ln() - c / x - lambda2 * (x - 1.0).abs()
}

/// Scheme-one variance update from b = sum tau / 2 and
/// c = sum tau (x - mu)^2 / 2. Shrinks the MLE c/b toward 1 under the
/// |sigma^2 - 1| penalty and lands exactly on 1 past the threshold.
pub fn variance_scheme_one_bc(b: f64, c: f64, lambda2_eff: f64) -> f64 {
    if lambda2_eff.is_infinite() {
        return 1.0;
    }
    let mle = c / b;
    if lambda2_eff == 0.0 || mle == 1.0 {
        return mle.max(VARIANCE_FLOOR);
    }
    let d = b - c;
    if d.abs() > lambda2_eff {
        // interior stationary point, strictly between 1 and the MLE
        let sign = if c > b { 1.0 } else { -1.0 };
        let inner = (0.25 + sign * lambda2_eff * c / (b * b)).max(0.0);
        return (mle / (0.5 + inner.sqrt())).max(VARIANCE_FLOOR);
    }
    if mle > 1.0 {
        return 1.0;
    }
    // mle < 1 here, so d = b - c is in (0, lambda2].
    if d < lambda2_eff {
        // 1 is a local maximizer; a second one may exist at the smaller root
        // of -l x^2 + b x - c = 0 inside (mle, 1). Ties go to 1 (sparser).
        let disc = b * b - 4.0 * lambda2_eff * c;
        if disc >= 0.0 {
            let root = (b - disc.sqrt()) / (2.0 * lambda2_eff);
            if root > mle && root < 1.0 {
                let q_root = scheme_one_objective(root, b, c, lambda2_eff);
                let q_one = scheme_one_objective(1.0, b, c, lambda2_eff);
                if q_root > q_one {
                    return root.max(VARIANCE_FLOOR);
                }
            }
        }
        1.0
    } else {
        // boundary case b - c = lambda2 exactly
        if mle < 0.5 {
            (c / lambda2_eff).max(VARIANCE_FLOOR)
        } else {
            1.0
        }
    }
}

/// Scheme-two variance update from b and c: thresholds at |b - c| <= lambda2,
/// otherwise rescales the MLE by 1 + sign(c - b) lambda2 / b.
pub fn variance_scheme_two_bc(b: f64, c: f64, lambda2_eff: f64) -> f64 {
    if lambda2_eff.is_infinite() {
        return 1.0;
    }
    let mle = c / b;
    if lambda2_eff == 0.0 {
        return mle.max(VARIANCE_FLOOR);
    }
    let d = b - c;
    if d.abs() <= lambda2_eff {
        return 1.0;
    }
    let sign = if c > b { 1.0 } else { -1.0 };
    (mle / (1.0 + sign * lambda2_eff / b)).max(VARIANCE_FLOOR)
}

fn bc_from_column(tau_i: &[f64], x_col: &[f64], mu_ik: f64) -> Result<(f64, f64)> {
    let t: f64 = tau_i.iter().sum();
    if t <= DEGENERACY_EPS {
        return Err(Error::EmptyCluster);
    }
    let c: f64 = tau_i
        .iter()
        .zip(x_col.iter())
        .map(|(&w, &x)| w * (x - mu_ik).powi(2))
        .sum();
    Ok((t / 2.0, c / 2.0))
}

/// Penalized variance update under the |sigma^2 - 1| penalty.
pub fn update_variance_scheme_one(
    tau_i: &[f64],
    x_col: &[f64],
    mu_ik: f64,
    lambda2_eff: f64,
) -> Result<f64> {
    let (b, c) = bc_from_column(tau_i, x_col, mu_ik)?;
    Ok(variance_scheme_one_bc(b, c, lambda2_eff))
}

/// Penalized variance update under the |log sigma^2| penalty.
pub fn update_variance_scheme_two(
    tau_i: &[f64],
    x_col: &[f64],
    mu_ik: f64,
    lambda2_eff: f64,
) -> Result<f64> {
    let (b, c) = bc_from_column(tau_i, x_col, mu_ik)?;
    Ok(variance_scheme_two_bc(b, c, lambda2_eff))
}

/// Adaptive penalty weights from a pilot fit: w = 1/|mu|^e, v = 1/|s2 - 1|^e.
/// A parameter exactly at its null value yields an infinite weight, pinning
/// it downstream. Exponent 0 reduces to unit weights.
pub fn adaptive_weights(mple: &MixtureParams, exponent: f64) -> (Array2<f64>, Array2<f64>) {
    let w = mple.mu.mapv(|m| 1.0 / m.abs().powf(exponent));
    let v = mple.sigma2.mapv(|s| 1.0 / (s - 1.0).abs().powf(exponent));
    (w, v)
}

/// Pin parameters with infinite weights at their null values so the penalty
/// stays finite from the first evaluation on.
fn pin_infinite_weights(params: &mut MixtureParams, penalty: &PenaltyConfig) {
    if let Some(w) = &penalty.mean_weights {
        for ((i, k), &wv) in w.indexed_iter() {
            if (penalty.lambda1 * wv).is_infinite() {
                params.mu[[i, k]] = 0.0;
            }
        }
    }
    if let Some(v) = &penalty.var_weights {
        for ((i, k), &vv) in v.indexed_iter() {
            if (penalty.lambda2 * vv).is_infinite() {
                params.sigma2[[i, k]] = 1.0;
            }
        }
    }
}

fn validate_fit_inputs(
    data: &Dataset,
    g: usize,
    penalty: &PenaltyConfig,
    cov_mode: CovMode,
    init: &MixtureParams,
    stop: &StopRule,
) -> Result<()> {
    stop.validate()?;
    if !data.standardized {
        return Err(Error::Config("em_fit requires standardized data".into()));
    }
    if init.g != g || init.mu.nrows() != g {
        return Err(Error::Config("init does not have g components".into()));
    }
    if init.n_vars() != data.n_vars() {
        return Err(Error::Config("init and data disagree on K".into()));
    }
    penalty.validate(g, data.n_vars())?;
    if cov_mode == CovMode::Equal {
        if penalty.lambda2 > 0.0 {
            return Err(Error::Config(
                "the equal-covariance model penalizes means only; lambda2 must be 0".into(),
            ));
        }
        if penalty
            .grouping
            .as_ref()
            .map(|gr| gr.group_variances)
            .unwrap_or(false)
        {
            return Err(Error::Config(
                "grouped variance penalties require the unequal-covariance model".into(),
            ));
        }
    }
    Ok(())
}

fn update_means(
    params: &mut MixtureParams,
    stats_x: &Array2<f64>,
    masses: &Array1<f64>,
    penalty: &PenaltyConfig,
) -> Result<()> {
    let g = params.g;
    let k = params.n_vars();
    let grouped = penalty
        .grouping
        .as_ref()
        .filter(|gr| gr.group_means);
    if let Some(gr) = grouped {
        let lists = gr.member_lists();
        for i in 0..g {
            for members in &lists {
                let weighted_x: Array1<f64> =
                    members.iter().map(|&kk| stats_x[[i, kk]]).collect();
                let sigma2_block: Array1<f64> =
                    members.iter().map(|&kk| params.sigma2[[i, kk]]).collect();
                let mu_init: Array1<f64> =
                    members.iter().map(|&kk| params.mu[[i, kk]]).collect();
                let block = GroupBlockInput {
                    tau_sum: masses[i],
                    weighted_x,
                    weighted_sq: Array1::zeros(members.len()),
                    sigma2_block,
                    k_m: members.len(),
                };
                let new_block = update_group_mean(&block, penalty.lambda1, &mu_init)?;
                for (slot, &kk) in members.iter().enumerate() {
                    params.mu[[i, kk]] = new_block[slot];
                }
            }
        }
    } else {
        for i in 0..g {
            for kk in 0..k {
                params.mu[[i, kk]] = mean_from_sums(
                    stats_x[[i, kk]],
                    masses[i],
                    params.sigma2[[i, kk]],
                    penalty.lambda1_eff(i, kk),
                );
            }
        }
    }
    Ok(())
}

fn update_variances(
    params: &mut MixtureParams,
    data: &Dataset,
    tau: &Responsibilities,
    masses: &Array1<f64>,
    penalty: &PenaltyConfig,
    cov_mode: CovMode,
) -> Result<()> {
    let g = params.g;
    let k = params.n_vars();
    let residuals = weighted_residuals(data, tau, &params.mu);

    if cov_mode == CovMode::Equal {
        let n = data.n() as f64;
        let mut common = residuals.sum_axis(ndarray::Axis(0)) / n;
        common.mapv_inplace(|v| v.max(VARIANCE_FLOOR));
        for i in 0..g {
            params.sigma2.row_mut(i).assign(&common);
        }
        return Ok(());
    }

    let grouped = penalty
        .grouping
        .as_ref()
        .filter(|gr| gr.group_variances);
    if let Some(gr) = grouped {
        let lists = gr.member_lists();
        for i in 0..g {
            for members in &lists {
                let weighted_sq: Array1<f64> =
                    members.iter().map(|&kk| residuals[[i, kk]]).collect();
                let sigma2_block: Array1<f64> =
                    members.iter().map(|&kk| params.sigma2[[i, kk]]).collect();
                let block = GroupBlockInput {
                    tau_sum: masses[i],
                    weighted_x: Array1::zeros(members.len()),
                    weighted_sq,
                    sigma2_block: sigma2_block.clone(),
                    k_m: members.len(),
                };
                let new_block = update_group_variance(&block, penalty.lambda2, &sigma2_block)?;
                for (slot, &kk) in members.iter().enumerate() {
                    params.sigma2[[i, kk]] = new_block[slot];
                }
            }
        }
    } else {
        for i in 0..g {
            let b = masses[i] / 2.0;
            for kk in 0..k {
                let c = residuals[[i, kk]] / 2.0;
                let l2 = penalty.lambda2_eff(i, kk);
                params.sigma2[[i, kk]] = match penalty.scheme {
                    crate::model::VarianceScheme::VarMinusOne => {
                        variance_scheme_one_bc(b, c, l2)
                    }
                    crate::model::VarianceScheme::LogVar => variance_scheme_two_bc(b, c, l2),
                };
            }
        }
    }
    Ok(())
}

/// Fit the penalized mixture by generalized EM: E-step, then one M-step
/// sweep in the order pi, means, variances.
///
/// If any cluster loses essentially all responsibility mass the fit is
/// returned as-is with `DegenerateCluster` status; model selection excludes
/// such fits.
pub fn em_fit(
    data: &Dataset,
    g: usize,
    penalty: &PenaltyConfig,
    cov_mode: CovMode,
    init: &MixtureParams,
    stop: &StopRule,
) -> Result<FitResult> {
    validate_fit_inputs(data, g, penalty, cov_mode, init, stop)?;

    let mut params = init.clone();
    if cov_mode == CovMode::Equal {
        params = params.into_equal_mode();
    } else {
        params.cov_mode = CovMode::Unequal;
    }
    params.sigma2.mapv_inplace(|v| v.max(VARIANCE_FLOOR));
    pin_infinite_weights(&mut params, penalty);

    let mut trace = vec![penalized_loglik(data, &params, penalty)?];
    let mut status = FitStatus::MaxIterations;
    let mut iterations = 0;
    let mut variance_floor_hit = false;

    for _ in 0..stop.max_iter {
        let tau = e_step(data, &params);
        let masses = tau.cluster_masses();
        if masses.iter().any(|&m| m <= DEGENERACY_EPS) {
            status = FitStatus::DegenerateCluster;
            break;
        }

        params.pi = &masses / data.n() as f64;
        let stats_x = tau.tau.t().dot(&data.values);
        update_means(&mut params, &stats_x, &masses, penalty)?;
        update_variances(&mut params, data, &tau, &masses, penalty, cov_mode)?;
        pin_infinite_weights(&mut params, penalty);
        if params.sigma2.iter().any(|&v| v == VARIANCE_FLOOR) {
            variance_floor_hit = true;
        }

        let lp = penalized_loglik(data, &params, penalty)?;
        let prev = *trace.last().unwrap();
        trace.push(lp);
        iterations += 1;
        if (lp - prev).abs() / (lp.abs() + 1.0) < stop.tol {
            status = FitStatus::Converged;
            break;
        }
    }

    let tau = e_step(data, &params);
    let loglik = mixture_loglik(data, &params);
    let penalized = *trace.last().unwrap();
    let zero_mean_count = params.mu.iter().filter(|&&m| m == 0.0).count();
    let unit_variance_count = params.sigma2.iter().filter(|&&v| v == 1.0).count();
    let noise = noise_variables(&params);

    Ok(FitResult {
        params,
        tau,
        penalized_loglik: penalized,
        loglik,
        trace,
        iterations,
        status,
        variance_floor_hit,
        zero_mean_count,
        unit_variance_count,
        noise_variable_indices: noise,
    })
}
