//! Small numeric helpers shared across the crate.

/// Log of the sum of exponentials, stable for large-magnitude inputs.
///
/// `-inf` entries (zero-probability terms) are skipped; an all-`-inf`
/// input returns `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-subtask seed derivation: same `(base, a, b)` always
/// yields the same seed, and distinct indices decorrelate the streams.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut s = splitmix64(base);
    s = splitmix64(s ^ a);
    splitmix64(s ^ b)
}
