//! Small shared statistics helpers for Monte Carlo estimates.

use serde::Serialize;

/// Monte Carlo estimate of a deviation-event probability.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DeviationEstimate {
    /// System size the event refers to (particles, or half-width N of a window).
    pub n: u64,
    /// Deviation threshold (1/m).
    pub threshold: f64,
    pub trials: u64,
    pub hits: u64,
    pub estimate: f64,
    /// Binomial standard error sqrt(p(1-p)/trials).
    pub std_error: f64,
}

impl DeviationEstimate {
    pub fn from_hits(n: u64, threshold: f64, trials: u64, hits: u64) -> Self {
        let p = hits as f64 / trials as f64;
        DeviationEstimate {
            n,
            threshold,
            trials,
            hits,
            estimate: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Unbiased sample covariance (n - 1 denominator).
pub fn sample_covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (xs.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_of_constant_is_zero() {
        assert_eq!(sample_variance(&[0.5, 0.5, 0.5]), 0.0);
    }

    #[test]
    fn covariance_of_identical_is_variance() {
        let xs = [0.0, 1.0, 0.0, 1.0, 1.0];
        assert!((sample_covariance(&xs, &xs) - sample_variance(&xs)).abs() < 1e-15);
    }
}
