//! Numeric helpers shared across the crate.
//!
//! Normalization checks run at tolerances around 1e-9 on inputs with up to
//! ~1e5 terms, so plain left-to-right summation is not good enough. All
//! probability-mass sums go through compensated summation.

/// Neumaier compensated sum. Error stays O(eps) independent of length.
pub fn comp_sum(values: impl IntoIterator<Item = f64>) -> f64 {
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

/// x * ln(x) with the measure-theoretic convention 0 * ln(0) = 0.
pub fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Shannon entropy of a nonnegative vector, in nats. Does not validate
/// normalization; callers own that check.
pub fn entropy_unchecked(p: &[f64]) -> f64 {
    -comp_sum(p.iter().map(|&x| xlnx(x)))
}
