//! Right-continuous step-function estimates in infectiousness age.

use crate::stats::{log_transformed_interval, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    CumulativeHazard,
    Survival,
}

/// A cadlag step function with its pointwise variance.
///
/// `increments[k]` is always the hazard increment at `times[k]` (for a survival
/// estimate this is the conditional failure probability of the product-limit
/// factor). `values[k]` is the estimate just after the jump.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEstimate {
    pub kind: EstimateKind,
    pub times: Vec<f64>,
    pub increments: Vec<f64>,
    pub values: Vec<f64>,
    pub variances: Vec<f64>,
    /// Right end of the domain where the risk set is positive.
    pub horizon: f64,
}

/// Pointwise confidence limits at one age.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint {
    pub tau: f64,
    pub estimate: f64,
    pub variance: f64,
    pub interval: Interval,
}

impl StepEstimate {
    pub fn empty(kind: EstimateKind, horizon: f64) -> Self {
        Self { kind, times: Vec::new(), increments: Vec::new(), values: Vec::new(), variances: Vec::new(), horizon }
    }

    /// Builds a cumulative hazard from jump ages, increments and variances.
    pub fn cumulative_hazard(times: Vec<f64>, increments: Vec<f64>, variances: Vec<f64>, horizon: f64) -> Self {
        let mut acc = 0.0;
        let values = increments
            .iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect();
        Self { kind: EstimateKind::CumulativeHazard, times, increments, values, variances, horizon }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn initial_value(&self) -> f64 {
        match self.kind {
            EstimateKind::CumulativeHazard => 0.0,
            EstimateKind::Survival => 1.0,
        }
    }

    /// Index of the last jump at or before `tau`.
    pub fn index_at(&self, tau: f64) -> Option<usize> {
        self.times.partition_point(|&t| t <= tau).checked_sub(1)
    }

    pub fn value_at(&self, tau: f64) -> f64 {
        self.index_at(tau).map_or(self.initial_value(), |k| self.values[k])
    }

    pub fn variance_at(&self, tau: f64) -> f64 {
        self.index_at(tau).map_or(0.0, |k| self.variances[k])
    }

    /// Cumulative hazard implied at `tau`: the value itself, or `-ln S` for survival.
    pub fn cumulative_hazard_at(&self, tau: f64) -> f64 {
        match self.kind {
            EstimateKind::CumulativeHazard => self.value_at(tau),
            EstimateKind::Survival => -self.value_at(tau).ln(),
        }
    }

    /// Log-transformed pointwise limits at `tau` using `variance`, which must be
    /// the variance of the cumulative hazard. Survival limits map the hazard
    /// limits through `S = exp(-Lambda)`.
    pub fn interval_with_variance(&self, tau: f64, variance: f64, alpha: f64) -> Interval {
        match self.kind {
            EstimateKind::CumulativeHazard => log_transformed_interval(self.value_at(tau), variance, alpha),
            EstimateKind::Survival => {
                let s = self.value_at(tau);
                if s <= 0.0 {
                    return Interval { lower: 0.0, upper: 0.0, degenerate: true };
                }
                let h = log_transformed_interval(-s.ln(), variance, alpha);
                if h.degenerate {
                    return Interval { lower: 1.0, upper: 1.0, degenerate: true };
                }
                Interval { lower: (-h.upper).exp(), upper: (-h.lower).exp(), degenerate: false }
            }
        }
    }

    /// Limits at `tau` from the stored variance. For survival the stored value is
    /// `var(S)`, converted to a hazard variance by the delta method.
    pub fn interval(&self, tau: f64, alpha: f64) -> Interval {
        let var = self.variance_at(tau);
        let hazard_var = match self.kind {
            EstimateKind::CumulativeHazard => var,
            EstimateKind::Survival => {
                let s = self.value_at(tau);
                if s > 0.0 { var / (s * s) } else { 0.0 }
            }
        };
        self.interval_with_variance(tau, hazard_var, alpha)
    }

    /// Applies the product-limit transform `S = prod (1 - dLambda)`.
    /// Variances are the Greenwood sums `S^2 sum d / (Y (Y - d))`, given the jump
    /// counts and risk-set sizes.
    pub fn to_survival(&self, events: &[f64], at_risk: &[f64]) -> StepEstimate {
        let mut s = 1.0;
        let mut greenwood = 0.0;
        let mut values = Vec::with_capacity(self.len());
        let mut variances = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            s *= (1.0 - self.increments[k]).max(0.0);
            let surviving = at_risk[k] - events[k];
            if surviving > 0.0 {
                greenwood += events[k] / (at_risk[k] * surviving);
            }
            values.push(s);
            variances.push(if s > 0.0 { s * s * greenwood } else { 0.0 });
        }
        StepEstimate {
            kind: EstimateKind::Survival,
            times: self.times.clone(),
            increments: self.increments.clone(),
            values,
            variances,
            horizon: self.horizon,
        }
    }
}
