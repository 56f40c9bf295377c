//! Small numerical helpers shared across modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stable `ln Σ exp(v_i)`. Returns `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Stable `ln Σ w_i exp(v_i)` for nonnegative weights; zero weights are skipped.
pub fn weighted_log_sum_exp(weights: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), values.len());
    let terms: Vec<f64> = weights
        .iter()
        .zip(values)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, v)| w.ln() + v)
        .collect();
    log_sum_exp(&terms)
}

/// Neumaier-compensated sum.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// SplitMix64 finalizer, used to derive independent named sub-seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a sub-seed from a root seed, a phase label and an index.
pub fn sub_seed(root: u64, phase: &str, index: u64) -> u64 {
    let mut h = mix64(root);
    for b in phase.bytes() {
        h = mix64(h ^ u64::from(b));
    }
    mix64(h ^ index)
}

/// The PRNG used everywhere randomness is needed: ChaCha8 seeded from a `u64`.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Inverse-CDF draw from an unnormalized cumulative table.
pub(crate) fn inverse_cdf(cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().expect("nonempty cumulative table");
    let target = u * total;
    let idx = cumulative.partition_point(|&c| c <= target);
    // u close to 1 can land past the end after rounding; fall back to the last
    // cell carrying mass
    if idx < cumulative.len() {
        idx
    } else {
        cumulative
            .iter()
            .rposition(|&c| c < total)
            .map_or(0, |i| i + 1)
    }
}

pub(crate) fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}
