//! Small statistical helpers shared across estimators and the study harness.

use statrs::distribution::{Beta, ContinuousCDF, Normal};

/// Standard normal quantile `Phi^{-1}(p)`.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Two-sided critical value `Phi^{-1}(1 - alpha/2)`.
pub fn z_two_sided(alpha: f64) -> f64 {
    normal_quantile(1.0 - alpha / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    /// Set when the point estimate is zero and the log transform is undefined.
    pub degenerate: bool,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Log-transformed pointwise limits `L * exp(+-(sigma / L) z)`.
pub fn log_transformed_interval(estimate: f64, variance: f64, alpha: f64) -> Interval {
    if !(estimate > 0.0) {
        return Interval { lower: 0.0, upper: 0.0, degenerate: true };
    }
    let sd = variance.max(0.0).sqrt();
    let spread = (sd / estimate) * z_two_sided(alpha);
    Interval { lower: estimate * (-spread).exp(), upper: estimate * spread.exp(), degenerate: false }
}

/// Exact (Clopper-Pearson) confidence interval for a binomial proportion.
pub fn clopper_pearson(successes: u64, trials: u64, alpha: f64) -> Option<(f64, f64)> {
    if trials == 0 || successes > trials {
        return None;
    }
    let x = successes as f64;
    let n = trials as f64;
    let lower = if successes == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0).ok()?.inverse_cdf(alpha / 2.0)
    };
    let upper = if successes == trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x).ok()?.inverse_cdf(1.0 - alpha / 2.0)
    };
    Some((lower, upper))
}

/// Linear-interpolation (type 7) sample quantile of already sorted data.
pub fn sorted_quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}
