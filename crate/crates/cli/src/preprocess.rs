//! Expression-matrix preprocessing: truncation, ratio/span filtering and
//! top-variance screening.

use ndarray::Array2;

/// Outcome of the preprocessing pipeline.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    /// Reduced matrix, observations x surviving variables.
    pub values: Array2<f64>,
    /// Original column indices of the surviving variables, in kept order.
    pub kept: Vec<usize>,
    /// Set when fewer variables survived the filter than `top_k` asked for.
    pub short_of_top_k: bool,
}

/// Clamp every value into [low, high]; drop any variable whose post-clamp
/// max/min <= ratio AND max - min <= span; keep the `top_k` variables with
/// the largest sample variance (denominator n, ties to the lower index).
pub fn preprocess_microarray(
    raw: &Array2<f64>,
    low: f64,
    high: f64,
    ratio: f64,
    span: f64,
    top_k: usize,
) -> Preprocessed {
    let clamped = raw.mapv(|v| v.clamp(low, high));
    let n = clamped.nrows() as f64;

    let mut survivors: Vec<usize> = Vec::new();
    for (k, col) in clamped.columns().into_iter().enumerate() {
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let filtered = max / min <= ratio && max - min <= span;
        if !filtered {
            survivors.push(k);
        }
    }

    let mut by_variance: Vec<(usize, f64)> = survivors
        .iter()
        .map(|&k| {
            let col = clamped.column(k);
            let mean = col.sum() / n;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            (k, var)
        })
        .collect();
    // descending variance, ties broken by the lower original index
    by_variance.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    let short_of_top_k = by_variance.len() < top_k;
    let mut kept: Vec<usize> = by_variance
        .into_iter()
        .take(top_k)
        .map(|(k, _)| k)
        .collect();
    kept.sort_unstable();

    let mut values = Array2::zeros((clamped.nrows(), kept.len()));
    for (out_col, &k) in kept.iter().enumerate() {
        values.column_mut(out_col).assign(&clamped.column(k));
    }

    Preprocessed {
        values,
        kept,
        short_of_top_k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn clamps_at_both_bounds() {
        let raw = array![[0.5, 20000.0], [2.0, 3.0]];
        let p = preprocess_microarray(&raw, 1.0, 16000.0, 0.0, 0.0, 2);
        assert_eq!(p.values[[0, 0]], 1.0);
        assert_eq!(p.values[[0, 1]], 16000.0);
    }

    #[test]
    fn filter_requires_both_conditions() {
        // var 0: max/min = 4 <= 5 and span 300 <= 500 -> dropped
        // var 1: ratio 100 > 5 -> kept even though span small relative rule
        let raw = array![[100.0, 100.0], [400.0, 10000.0]];
        let p = preprocess_microarray(&raw, 1.0, 16000.0, 5.0, 500.0, 10);
        assert_eq!(p.kept, vec![1]);
        assert!(p.short_of_top_k);
    }

    #[test]
    fn ratio_large_but_span_small_is_kept() {
        // max/min = 6 > 5: the AND fails, variable survives
        let raw = array![[10.0], [60.0]];
        let p = preprocess_microarray(&raw, 1.0, 16000.0, 5.0, 500.0, 1);
        assert_eq!(p.kept, vec![0]);
    }

    #[test]
    fn top_k_by_variance_with_index_ties() {
        let raw = array![
            [1.0, 1.0, 1.0],
            [1001.0, 2001.0, 2001.0],
        ];
        let p = preprocess_microarray(&raw, 1.0, 16000.0, 5.0, 500.0, 2);
        // vars 1 and 2 tie on variance; both beat var 0
        assert_eq!(p.kept, vec![1, 2]);
        let p1 = preprocess_microarray(&raw, 1.0, 16000.0, 5.0, 500.0, 1);
        // tie broken toward the lower index
        assert_eq!(p1.kept, vec![1]);
    }

    #[test]
    fn idempotent_at_fixed_settings() {
        let raw = array![
            [1.0, 700.0, 3.0, 9000.0],
            [900.0, 1.0, 80.0, 2.0],
            [30.0, 40.0, 700.0, 10000.0],
        ];
        let p = preprocess_microarray(&raw, 1.0, 16000.0, 5.0, 500.0, 3);
        let q = preprocess_microarray(&p.values, 1.0, 16000.0, 5.0, 500.0, 3);
        assert_eq!(q.kept, (0..p.kept.len()).collect::<Vec<_>>());
        assert_eq!(p.values, q.values);
    }
}
