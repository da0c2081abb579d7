//! Block M-step solvers for grouped means and grouped variances.
//!
//! A group of k_m variables is shrunk as one unit: the whole mean block can
//! land exactly on the zero vector, the whole variance block exactly on the
//! all-ones vector. Groups of size one reduce to the ungrouped updates.

use ndarray::{array, Array1};

use crate::em::{mean_from_sums, variance_scheme_one_bc};
use crate::error::{Error, Result};
use crate::model::{DEGENERACY_EPS, VARIANCE_FLOOR};

const VAR_OUTER_TOL: f64 = 1e-8;
const VAR_OUTER_CAP: usize = 300;
const BISECT_TOL: f64 = 1e-10;
const BISECT_CAP: usize = 200;

/// Responsibility-weighted statistics of one (cluster, group) block.
#[derive(Debug, Clone)]
pub struct GroupBlockInput {
    /// Sum of responsibilities for the cluster.
    pub tau_sum: f64,
    /// Sum_j tau_ij x_j^m, length k_m. Used by the mean update.
    pub weighted_x: Array1<f64>,
    /// Sum_j tau_ij (x_j^m - mu_i^m)^2 element-wise, length k_m.
    /// Used by the variance update; computed against the current means.
    pub weighted_sq: Array1<f64>,
    /// Current variance block (the diagonal of V_im), length k_m.
    pub sigma2_block: Array1<f64>,
    pub k_m: usize,
}

/// Block soft-threshold for a grouped mean: returns the zero vector when
/// ||V^-1 sum tau x|| <= lambda1 sqrt(k_m), otherwise solves the diagonal
/// fixed point mu = (I + lambda1 sqrt(k_m)/(sum tau ||mu||) V)^-1 mu~.
///
/// Every iterate of that map is a function of r = ||mu|| alone, so the fixed
/// point is found exactly by bisecting r on (0, ||mu~||]; `mu_init` seeds
/// nothing because the maximizer is unique. A group of size one is the
/// ordinary scalar soft-threshold and is computed in closed form.
pub fn update_group_mean(
    block: &GroupBlockInput,
    lambda1: f64,
    _mu_init: &Array1<f64>,
) -> Result<Array1<f64>> {
    let t = block.tau_sum;
    if t <= DEGENERACY_EPS {
        return Err(Error::EmptyCluster);
    }
    let km = block.k_m as f64;

    let vinv_s_norm: f64 = block
        .weighted_x
        .iter()
        .zip(block.sigma2_block.iter())
        .map(|(&s, &v)| (s / v).powi(2))
        .sum::<f64>()
        .sqrt();
    if vinv_s_norm <= lambda1 * km.sqrt() {
        return Ok(Array1::zeros(block.k_m));
    }

    let mu_tilde = &block.weighted_x / t;
    if lambda1 == 0.0 {
        return Ok(mu_tilde);
    }
    if block.k_m == 1 {
        return Ok(array![mean_from_sums(
            block.weighted_x[0],
            t,
            block.sigma2_block[0],
            lambda1
        )]);
    }

    let alpha = lambda1 * km.sqrt() / t;
    let mu_at = |r: f64| -> Array1<f64> {
        Array1::from_shape_fn(block.k_m, |k| {
            mu_tilde[k] * r / (r + alpha * block.sigma2_block[k])
        })
    };
    // h(r) = ||mu(r)|| - r: positive near 0 (threshold failed), negative at
    // ||mu~||; its unique root is the block maximizer's norm
    let h = |r: f64| -> f64 {
        mu_at(r).iter().map(|m| m * m).sum::<f64>().sqrt() - r
    };

    let mut lo = 0.0f64;
    let mut hi = mu_tilde.iter().map(|m| m * m).sum::<f64>().sqrt();
    for _ in 0..BISECT_CAP {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    Ok(mu_at(0.5 * (lo + hi)))
}

/// Whether the all-ones vector is a local maximizer for this variance block:
/// ||b 1 - c|| against lambda2 sqrt(k_m), with the inequality strict unless
/// sum tau [1/2 - (x - mu)^2] <= 0 holds element-wise.
pub fn check_group_variance_at_one(block: &GroupBlockInput, lambda2: f64) -> bool {
    let b = block.tau_sum / 2.0;
    let rhs = lambda2 * (block.k_m as f64).sqrt();
    let d_norm: f64 = block
        .weighted_sq
        .iter()
        .map(|&wsq| (b - wsq / 2.0).powi(2))
        .sum::<f64>()
        .sqrt();
    let weak_branch = block.weighted_sq.iter().all(|&wsq| b - wsq <= 0.0);
    if weak_branch {
        d_norm <= rhs
    } else {
        d_norm < rhs
    }
}

/// True block objective: likelihood part plus the group penalty on sigma^2.
fn block_objective(x: &Array1<f64>, b: f64, c: &Array1<f64>, lambda2: f64, km: f64) -> f64 {
    let lik: f64 = x
        .iter()
        .zip(c.iter())
        .map(|(&xv, &cv)| -b * xv.ln() - cv / xv)
        .sum();
    let norm: f64 = x.iter().map(|&xv| (xv - 1.0).powi(2)).sum::<f64>().sqrt();
    lik - lambda2 * km.sqrt() * norm
}

/// Surrogate used for root selection: the group penalty replaced by its
/// plug-in quadratic with frozen a_im; the cubic's roots are exactly its
/// stationary points.
fn surrogate(x: f64, b: f64, c: f64, a: f64) -> f64 {
    -b * x.ln() - c / x - 0.5 * a * (x - 1.0).powi(2)
}

fn cubic(x: f64, b_over_a: f64, c_over_a: f64) -> f64 {
    ((x - 1.0) * x + b_over_a) * x - c_over_a
}

/// Bracketed root of the cubic to absolute tolerance 1e-10: bisection
/// safeguards, Newton steps inside the bracket for speed.
fn bisect(lo: f64, hi: f64, b_over_a: f64, c_over_a: f64) -> Option<f64> {
    let mut lo = lo;
    let mut hi = hi;
    let flo0 = cubic(lo, b_over_a, c_over_a);
    let fhi = cubic(hi, b_over_a, c_over_a);
    if flo0 == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo0.signum() == fhi.signum() {
        return None;
    }
    let mut flo = flo0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..BISECT_CAP {
        let fx = cubic(x, b_over_a, c_over_a);
        if fx == 0.0 {
            return Some(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        if hi - lo < BISECT_TOL {
            return Some(0.5 * (lo + hi));
        }
        let slope = (3.0 * x - 2.0) * x + b_over_a;
        let newton = x - fx / slope;
        if slope != 0.0 && newton > lo && newton < hi {
            if (newton - x).abs() < BISECT_TOL {
                return Some(newton);
            }
            x = newton;
        } else {
            x = 0.5 * (lo + hi);
        }
    }
    Some(0.5 * (lo + hi))
}

/// Solve the per-coordinate cubic with frozen a and pick the stationary
/// point with the best surrogate value. Returns None when no bracketed root
/// exists (stale a); callers fall back to the better bracket endpoint.
fn solve_coordinate(b: f64, c: f64, a: f64) -> Option<f64> {
    let mle = c / b;
    if mle == 1.0 {
        return Some(1.0);
    }
    if c == 0.0 {
        // no residual mass: the likelihood pushes the variance to zero
        return Some(VARIANCE_FLOOR);
    }
    let b_over_a = b / a;
    let c_over_a = c / a;
    if mle > 1.0 {
        // single real root in (1, mle)
        return bisect(1.0, mle, b_over_a, c_over_a);
    }
    // mle < 1: bisect for one root, factor out the quadratic for the rest
    let x1 = bisect(mle, 1.0, b_over_a, c_over_a)?;
    let p = x1 - 1.0; // a2 + x1 with a2 = -1
    let q = b_over_a - x1 + x1 * x1;
    let mut best = x1;
    let mut best_val = surrogate(x1, b, c, a);
    let disc = p * p - 4.0 * q;
    if disc >= 0.0 {
        let root_d = disc.sqrt();
        for r in [(-p + root_d) / 2.0, (-p - root_d) / 2.0] {
            if r > mle && r < 1.0 {
                let val = surrogate(r, b, c, a);
                if val > best_val {
                    best = r;
                    best_val = val;
                }
            }
        }
    }
    Some(best)
}

/// One coordinate sweep with frozen a, in place; returns the largest
/// coordinate move.
fn sweep(sigma2: &mut Array1<f64>, b: f64, c: &Array1<f64>, mle: &Array1<f64>, a: f64) -> f64 {
    let mut delta = 0.0f64;
    for k in 0..sigma2.len() {
        let value = match solve_coordinate(b, c[k], a) {
            Some(root) => root.max(VARIANCE_FLOOR),
            None => {
                // stale a left no sign change in the bracket; take the
                // better endpoint and let the next outer sweep correct it
                let lo = mle[k].min(1.0);
                let hi = mle[k].max(1.0);
                if surrogate(lo, b, c[k], a) >= surrogate(hi, b, c[k], a) {
                    lo
                } else {
                    hi
                }
            }
        };
        delta = delta.max((value - sigma2[k]).abs());
        sigma2[k] = value;
    }
    delta
}

fn dist_to_ones(x: &Array1<f64>) -> f64 {
    x.iter().map(|&v| (v - 1.0).powi(2)).sum::<f64>().sqrt()
}

/// Grouped variance update: either the whole block lands on the all-ones
/// vector, or an outer loop re-freezes a_im = lambda2 sqrt(k_m)/||sigma2 - 1||
/// and sweeps the per-coordinate cubics until the block stabilizes. The
/// frozen-a sweep majorizes the group penalty, so each outer iteration is an
/// ascent step on the true block objective; an Aitken jump on ||sigma2 - 1||
/// (accepted only when it does not decrease the objective) shortcuts the
/// geometric tail near the threshold.
///
/// When the all-ones vector passes its local-maximizer test it is still
/// compared against the interior stationary point (when one exists) and the
/// better of the two is returned, ties toward all-ones. A group of size one
/// is exactly the ungrouped scheme-one update and is computed in closed form.
pub fn update_group_variance(
    block: &GroupBlockInput,
    lambda2: f64,
    sigma2_init: &Array1<f64>,
) -> Result<Array1<f64>> {
    let t = block.tau_sum;
    if t <= DEGENERACY_EPS {
        return Err(Error::EmptyCluster);
    }
    let b = t / 2.0;
    let c = &block.weighted_sq / 2.0;
    let km = block.k_m as f64;
    let mle = c.mapv(|cv| (cv / b).max(VARIANCE_FLOOR));

    if lambda2 == 0.0 {
        return Ok(mle);
    }
    if block.k_m == 1 {
        return Ok(array![variance_scheme_one_bc(b, c[0], lambda2)]);
    }

    let ones = Array1::ones(block.k_m);
    let ones_ok = check_group_variance_at_one(block, lambda2);

    let init_dist = dist_to_ones(sigma2_init);
    let mut sigma2 = if init_dist > 1e-12 {
        sigma2_init.mapv(|v| v.max(VARIANCE_FLOOR))
    } else {
        mle.clone()
    };

    let rho_max = dist_to_ones(&mle);
    let mut rho_history: Vec<f64> = Vec::with_capacity(VAR_OUTER_CAP);
    let mut converged = false;
    for _ in 0..VAR_OUTER_CAP {
        let rho = dist_to_ones(&sigma2);
        if rho < 1e-12 {
            // the iteration collapsed onto the all-ones vector
            sigma2 = ones.clone();
            converged = true;
            break;
        }
        rho_history.push(rho);

        // Aitken extrapolation of the scalar rho sequence, kept only when it
        // does not hurt the true objective
        if rho_history.len() >= 3 {
            let m = rho_history.len();
            let (r0, r1, r2) = (rho_history[m - 3], rho_history[m - 2], rho_history[m - 1]);
            let denom = r2 - 2.0 * r1 + r0;
            if denom.abs() > 1e-300 {
                let guess = r0 - (r1 - r0).powi(2) / denom;
                if guess.is_finite() && guess > 0.0 && guess <= rho_max * (1.0 + 1e-9) {
                    let a = lambda2 * km.sqrt() / guess;
                    let mut jump = sigma2.clone();
                    sweep(&mut jump, b, &c, &mle, a);
                    if block_objective(&jump, b, &c, lambda2, km)
                        >= block_objective(&sigma2, b, &c, lambda2, km)
                    {
                        let moved = jump
                            .iter()
                            .zip(sigma2.iter())
                            .map(|(x, y)| (x - y).abs())
                            .fold(0.0f64, f64::max);
                        sigma2 = jump;
                        rho_history.clear();
                        if moved < VAR_OUTER_TOL {
                            converged = true;
                            break;
                        }
                        continue;
                    }
                }
            }
        }

        let a = lambda2 * km.sqrt() / rho;
        let delta = sweep(&mut sigma2, b, &c, &mle, a);
        if delta < VAR_OUTER_TOL {
            converged = true;
            break;
        }
    }

    if !converged {
        if ones_ok {
            return Ok(ones);
        }
        return Err(Error::NoConvergence {
            what: "grouped variance outer loop",
            limit: VAR_OUTER_CAP,
        });
    }

    if ones_ok {
        let f_ones = block_objective(&ones, b, &c, lambda2, km);
        let f_candidate = block_objective(&sigma2, b, &c, lambda2, km);
        if f_candidate > f_ones {
            return Ok(sigma2);
        }
        return Ok(ones);
    }
    Ok(sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::{update_mean, update_variance_scheme_one};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mean_block(tau: &[f64], cols: &[Vec<f64>], sigma2: &[f64]) -> GroupBlockInput {
        let t: f64 = tau.iter().sum();
        let wx: Vec<f64> = cols
            .iter()
            .map(|col| tau.iter().zip(col.iter()).map(|(&w, &x)| w * x).sum())
            .collect();
        GroupBlockInput {
            tau_sum: t,
            weighted_x: Array1::from(wx),
            weighted_sq: Array1::zeros(cols.len()),
            sigma2_block: Array1::from(sigma2.to_vec()),
            k_m: cols.len(),
        }
    }

    fn var_block(tau: &[f64], cols: &[Vec<f64>], mu: &[f64], sigma2: &[f64]) -> GroupBlockInput {
        let t: f64 = tau.iter().sum();
        let wsq: Vec<f64> = cols
            .iter()
            .zip(mu.iter())
            .map(|(col, &m)| {
                tau.iter()
                    .zip(col.iter())
                    .map(|(&w, &x)| w * (x - m).powi(2))
                    .sum()
            })
            .collect();
        GroupBlockInput {
            tau_sum: t,
            weighted_x: Array1::zeros(cols.len()),
            weighted_sq: Array1::from(wsq),
            sigma2_block: Array1::from(sigma2.to_vec()),
            k_m: cols.len(),
        }
    }

    #[test]
    fn group_mean_thresholds_to_zero_vector() {
        let block = GroupBlockInput {
            tau_sum: 4.0,
            weighted_x: array![0.5, -0.5],
            weighted_sq: array![0.0, 0.0],
            sigma2_block: array![1.0, 1.0],
            k_m: 2,
        };
        // ||V^-1 s|| = sqrt(0.5) <= 2 sqrt(2)
        let out = update_group_mean(&block, 2.0, &array![0.0, 0.0]).unwrap();
        assert_eq!(out, array![0.0, 0.0]);
    }

    #[test]
    fn group_mean_hand_value() {
        // k=2, V=I, T=4, s=(10, 0), lambda=2: (2.5 - sqrt(2)/2, 0)
        let block = GroupBlockInput {
            tau_sum: 4.0,
            weighted_x: array![10.0, 0.0],
            weighted_sq: array![0.0, 0.0],
            sigma2_block: array![1.0, 1.0],
            k_m: 2,
        };
        let out = update_group_mean(&block, 2.0, &array![0.0, 0.0]).unwrap();
        assert!((out[0] - 1.792_893_218_813_452).abs() < 1e-7);
        assert!(out[1].abs() < 1e-12);
    }

    #[test]
    fn group_mean_stationarity_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let km = rng.random_range(1..5);
            let n = 12;
            let tau: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let cols: Vec<Vec<f64>> = (0..km)
                .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let sigma2: Vec<f64> = (0..km).map(|_| rng.random_range(0.3..3.0)).collect();
            let lambda1 = rng.random_range(0.0..3.0);
            let block = mean_block(&tau, &cols, &sigma2);
            let mu = update_group_mean(&block, lambda1, &Array1::zeros(km)).unwrap();
            let norm = mu.iter().map(|m| m * m).sum::<f64>().sqrt();
            if norm == 0.0 {
                // threshold case: Eq-style condition must hold
                let z: f64 = block
                    .weighted_x
                    .iter()
                    .zip(&sigma2)
                    .map(|(&s, &v)| (s / v).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(z <= lambda1 * (km as f64).sqrt() + 1e-12);
                continue;
            }
            let t = block.tau_sum;
            for k in 0..km {
                let residual = (block.weighted_x[k] - t * mu[k]) / sigma2[k]
                    - lambda1 * (km as f64).sqrt() * mu[k] / norm;
                assert!(
                    residual.abs() < 1e-6,
                    "stationarity violated: {residual}"
                );
            }
        }
    }

    #[test]
    fn group_mean_size_one_matches_scalar_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..200 {
            let n = 10;
            let tau: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let col: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s2 = rng.random_range(0.3..3.0);
            let lambda1 = rng.random_range(0.0..3.0);
            let block = mean_block(&tau, std::slice::from_ref(&col), &[s2]);
            let grouped = update_group_mean(&block, lambda1, &array![0.0]).unwrap();
            let scalar = update_mean(&tau, &col, s2, lambda1).unwrap();
            assert!(
                (grouped[0] - scalar).abs() < 1e-8,
                "k_m=1 mismatch: {} vs {}",
                grouped[0],
                scalar
            );
        }
    }

    #[test]
    fn group_variance_threshold_hand_check() {
        // b=10, c=(20, 12): d=(-10, -2), ||d|| = sqrt(104) > 2 sqrt(2)
        let block = GroupBlockInput {
            tau_sum: 20.0,
            weighted_x: array![0.0, 0.0],
            weighted_sq: array![40.0, 24.0],
            sigma2_block: array![1.0, 1.0],
            k_m: 2,
        };
        assert!(!check_group_variance_at_one(&block, 2.0));
        assert!(check_group_variance_at_one(&block, 1e6));
    }

    #[test]
    fn group_variance_zero_difference_passes_for_any_lambda() {
        // c = b element-wise: d = 0, weak branch applies, 0 <= rhs
        let block = GroupBlockInput {
            tau_sum: 20.0,
            weighted_x: array![0.0, 0.0],
            weighted_sq: array![20.0, 20.0],
            sigma2_block: array![1.0, 1.0],
            k_m: 2,
        };
        assert!(check_group_variance_at_one(&block, 0.0));
    }

    #[test]
    fn group_variance_huge_lambda_returns_ones() {
        let block = GroupBlockInput {
            tau_sum: 20.0,
            weighted_x: array![0.0, 0.0],
            weighted_sq: array![40.0, 24.0],
            sigma2_block: array![2.0, 1.2],
            k_m: 2,
        };
        let out = update_group_variance(&block, 1e9, &array![2.0, 1.2]).unwrap();
        assert_eq!(out, array![1.0, 1.0]);
    }

    #[test]
    fn group_variance_zero_lambda_returns_mle() {
        let block = GroupBlockInput {
            tau_sum: 20.0,
            weighted_x: array![0.0, 0.0],
            weighted_sq: array![40.0, 24.0],
            sigma2_block: array![1.0, 1.0],
            k_m: 2,
        };
        let out = update_group_variance(&block, 0.0, &array![1.0, 1.0]).unwrap();
        assert!((out[0] - 2.0).abs() < 1e-12);
        assert!((out[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn group_variance_size_one_matches_scheme_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for trial in 0..200 {
            let n = 10;
            let tau: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let col: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mu = rng.random_range(-1.0..1.0);
            let lambda2 = rng.random_range(0.0..4.0);
            let block = var_block(&tau, std::slice::from_ref(&col), &[mu], &[1.0]);
            let init = array![(block.weighted_sq[0] / block.tau_sum).max(VARIANCE_FLOOR)];
            let grouped = update_group_variance(&block, lambda2, &init).unwrap();
            let scalar = update_variance_scheme_one(&tau, &col, mu, lambda2).unwrap();
            assert!(
                (grouped[0] - scalar).abs() < 1e-8,
                "trial {trial}: k_m=1 mismatch {} vs {} (lambda2={lambda2})",
                grouped[0],
                scalar
            );
        }
    }

    #[test]
    fn group_variance_outputs_lie_between_one_and_mle() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..300 {
            let km = rng.random_range(1..4);
            let b = rng.random_range(1.0..50.0);
            let c: Vec<f64> = (0..km).map(|_| rng.random_range(0.1..100.0)).collect();
            let lambda2 = rng.random_range(0.0..20.0);
            let block = GroupBlockInput {
                tau_sum: 2.0 * b,
                weighted_x: Array1::zeros(km),
                weighted_sq: Array1::from(c.iter().map(|&cv| 2.0 * cv).collect::<Vec<_>>()),
                sigma2_block: Array1::ones(km),
                k_m: km,
            };
            let init = Array1::from(c.iter().map(|&cv| (cv / b).max(VARIANCE_FLOOR)).collect::<Vec<_>>());
            let out = update_group_variance(&block, lambda2, &init).unwrap();
            for (k, &v) in out.iter().enumerate() {
                let mle = (c[k] / b).max(VARIANCE_FLOOR);
                let lo = mle.min(1.0) - 1e-9;
                let hi = mle.max(1.0) + 1e-9;
                assert!(
                    v >= lo && v <= hi,
                    "coordinate {k} escaped [{lo}, {hi}]: {v} (mle {mle})"
                );
            }
        }
    }
}
