//! Small numeric helpers shared across the crate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Compensated (Neumaier) summation.
///
/// Scenario aggregates are reduced in a fixed order so results do not
/// depend on the thread count; the compensation keeps them stable when
/// the number of scenarios gets large.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
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

/// Sample mean together with the standard error of the mean.
///
/// Returns `(mean, standard_error)`. The standard error is zero for
/// samples of length one.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "mean of empty sample");
    let n = values.len() as f64;
    let mean = neumaier_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    let var = ss / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Quantile of an unsorted sample using linear interpolation between
/// order statistics (the common "type 7" definition: `h = (n-1)p + 1`).
pub fn quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty sample");
    assert!((0.0..=1.0).contains(&p), "quantile level out of range");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quantile input"));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Median, as a convenience wrapper around [`quantile`].
pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Dedicated random stream for one scenario.
///
/// All Monte Carlo code derives its generator from a master seed plus the
/// scenario index via ChaCha's independent streams, so scenario `i` sees
/// the same draws no matter how work is distributed over threads.
pub fn scenario_rng(master_seed: u64, scenario: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(scenario);
    rng
}

/// Derive a sub-seed for an auxiliary random context (for example the
/// inner stage of a nested simulation) so it cannot collide with the
/// scenario streams of the parent seed. SplitMix64 finalizer.
pub fn derive_seed(master_seed: u64, label: u64) -> u64 {
    let mut z = master_seed ^ label.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
