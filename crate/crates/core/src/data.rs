//! Observation matrices and column standardization.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An n x K observation matrix together with standardization metadata.
///
/// `column_means` / `column_sds` record the pre-standardization moments so
/// a fit can be mapped back to the raw scale. The standard deviation uses
/// denominator `n` (the MLE convention), matching the likelihood framework.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub values: Array2<f64>,
    pub standardized: bool,
    pub column_means: Array1<f64>,
    pub column_sds: Array1<f64>,
}

impl Dataset {
    /// Number of observations (rows).
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of variables (columns).
    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    /// Wrap a matrix without standardizing; `standardized` is set to false.
    /// Intended for tests and for feeding pre-scaled data to low-level ops.
    pub fn raw(values: Array2<f64>) -> Self {
        let k = values.ncols();
        Dataset {
            values,
            standardized: false,
            column_means: Array1::zeros(k),
            column_sds: Array1::ones(k),
        }
    }

    /// Wrap a matrix that is already standardized (mean 0, variance 1 with
    /// denominator n per column). Checked against the stated tolerances.
    pub fn pre_standardized(values: Array2<f64>) -> Result<Self> {
        let n = values.nrows() as f64;
        for (k, col) in values.columns().into_iter().enumerate() {
            let mean = col.sum() / n;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            if mean.abs() > 1e-10 || (var - 1.0).abs() > 1e-10 {
                return Err(Error::Config(format!(
                    "column {k} is not standardized (mean {mean:.3e}, var {var:.6})"
                )));
            }
        }
        let k = values.ncols();
        Ok(Dataset {
            values,
            standardized: true,
            column_means: Array1::zeros(k),
            column_sds: Array1::ones(k),
        })
    }
}

/// Center and scale every column to sample mean 0 and sample variance 1,
/// variance with denominator n.
pub fn standardize(raw: &Array2<f64>) -> Result<Dataset> {
    let n = raw.nrows();
    let k = raw.ncols();
    if n < 2 {
        return Err(Error::TooFewObservations(n));
    }
    for ((row, col), v) in raw.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::InvalidValue { row, col });
        }
    }

    let nf = n as f64;
    let mut means = Array1::zeros(k);
    let mut sds = Array1::zeros(k);
    let mut values = raw.clone();
    for (j, mut col) in values.columns_mut().into_iter().enumerate() {
        let mean = col.sum() / nf;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
        if var == 0.0 {
            return Err(Error::ConstantColumn(j));
        }
        let sd = var.sqrt();
        col.mapv_inplace(|x| (x - mean) / sd);
        means[j] = mean;
        sds[j] = sd;
    }

    Ok(Dataset {
        values,
        standardized: true,
        column_means: means,
        column_sds: sds,
    })
}
