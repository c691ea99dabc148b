//! Binomial confidence intervals for error counts.

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// Wilson score interval for `errors` successes out of `trials`.
///
/// Returns `(0, 1)` when `trials` is zero. With zero errors the lower limit is
/// exactly zero and the upper limit stays finite.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let rad = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if errors == 0 { 0.0 } else { ((center - rad) / denom).max(0.0) };
    let high = if errors == trials { 1.0 } else { ((center + rad) / denom).min(1.0) };
    (low, high)
}
