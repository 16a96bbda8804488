//! Parametric contact-interval families and the smoothed nonparametric hazard.
//!
//! Weibull and gamma families use the shape/rate parameterisation, so
//! Weibull(s, r) has cumulative hazard `(r tau)^s`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::smoothing::SmoothedHazard;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Exponential,
    Weibull,
    Gamma,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Exponential => "exponential",
            Family::Weibull => "weibull",
            Family::Gamma => "gamma",
        }
    }

    pub fn parameter_count(self) -> usize {
        match self {
            Family::Exponential => 1,
            Family::Weibull | Family::Gamma => 2,
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(Family::Exponential),
            "weibull" => Ok(Family::Weibull),
            "gamma" => Ok(Family::Gamma),
            other => Err(Error::InvalidParameter(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HazardModel {
    /// Constant hazard. A zero rate is allowed and means no contact ever happens.
    Exponential { rate: f64 },
    Weibull { shape: f64, rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Smoothed(SmoothedHazard),
}

impl HazardModel {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!("exponential rate {rate}")));
        }
        Ok(HazardModel::Exponential { rate })
    }

    pub fn weibull(shape: f64, rate: f64) -> Result<Self> {
        check_positive("weibull shape", shape)?;
        check_positive("weibull rate", rate)?;
        Ok(HazardModel::Weibull { shape, rate })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        check_positive("gamma shape", shape)?;
        check_positive("gamma rate", rate)?;
        Ok(HazardModel::Gamma { shape, rate })
    }

    /// Builds a parametric model from a family and its parameter vector.
    pub fn from_params(family: Family, params: &[f64]) -> Result<Self> {
        if params.len() != family.parameter_count() {
            return Err(Error::InvalidParameter(format!(
                "{} takes {} parameters, got {}",
                family.name(),
                family.parameter_count(),
                params.len()
            )));
        }
        match family {
            Family::Exponential => Self::exponential(params[0]),
            Family::Weibull => Self::weibull(params[0], params[1]),
            Family::Gamma => Self::gamma(params[0], params[1]),
        }
    }

    pub fn family(&self) -> Option<Family> {
        match self {
            HazardModel::Exponential { .. } => Some(Family::Exponential),
            HazardModel::Weibull { .. } => Some(Family::Weibull),
            HazardModel::Gamma { .. } => Some(Family::Gamma),
            HazardModel::Smoothed(_) => None,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            HazardModel::Exponential { rate } => vec![rate],
            HazardModel::Weibull { shape, rate } | HazardModel::Gamma { shape, rate } => vec![shape, rate],
            HazardModel::Smoothed(_) => Vec::new(),
        }
    }

    /// Hazard `lambda(tau)` for `tau > 0`.
    pub fn hazard(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0) {
            return Err(Error::Domain(tau));
        }
        Ok(match *self {
            HazardModel::Exponential { rate } => rate,
            HazardModel::Weibull { shape, rate } => shape * rate * (rate * tau).powf(shape - 1.0),
            HazardModel::Gamma { shape, rate } => gamma_log_hazard(shape, rate, tau).exp(),
            HazardModel::Smoothed(ref s) => s.hazard(tau),
        })
    }

    /// Cumulative hazard `Lambda(tau)` for `tau >= 0`.
    pub fn cumulative_hazard(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        match *self {
            HazardModel::Exponential { rate } => rate * tau,
            HazardModel::Weibull { shape, rate } => (rate * tau).powf(shape),
            HazardModel::Gamma { shape, rate } => -ln_gamma_upper_regularized(shape, rate * tau),
            HazardModel::Smoothed(ref s) => s.cumulative(tau),
        }
    }

    pub fn survival(&self, tau: f64) -> f64 {
        (-self.cumulative_hazard(tau)).exp()
    }

    /// `Lambda^{-1}(x)`; infinite when the cumulative hazard never reaches `x`.
    pub fn inverse_cumulative_hazard(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            HazardModel::Exponential { rate } => {
                if rate > 0.0 {
                    x / rate
                } else {
                    f64::INFINITY
                }
            }
            HazardModel::Weibull { shape, rate } => x.powf(1.0 / shape) / rate,
            _ => invert_monotone(|t| self.cumulative_hazard(t), x),
        }
    }

    /// Draws a contact interval by inverse transform: `Lambda^{-1}(E)`, `E ~ Exp(1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = Exp1.sample(rng);
        self.inverse_cumulative_hazard(e)
    }
}

impl fmt::Display for HazardModel {
    /// `family,param1,param2` as used in model CSV lines.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            HazardModel::Exponential { rate } => write!(f, "exponential,{rate}"),
            HazardModel::Weibull { shape, rate } => write!(f, "weibull,{shape},{rate}"),
            HazardModel::Gamma { shape, rate } => write!(f, "gamma,{shape},{rate}"),
            HazardModel::Smoothed(_) => write!(f, "smoothed"),
        }
    }
}

impl FromStr for HazardModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut fields = s.split(',').map(str::trim).filter(|f| !f.is_empty());
        let family: Family = fields.next().ok_or_else(|| Error::InvalidParameter("empty model".into()))?.parse()?;
        let params = fields
            .map(|f| f.parse::<f64>().map_err(|e| Error::InvalidParameter(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_params(family, &params)
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

/// `ln Q(a, x)` where `Q` is the regularized upper incomplete gamma function.
pub(crate) fn ln_gamma_upper_regularized(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        return (-gamma_lr(a, x)).ln_1p();
    }
    let q = gamma_ur(a, x);
    if q > 1e-280 {
        return q.ln();
    }
    // asymptotic expansion of Gamma(a, x) for large x
    let mut term: f64 = 1.0;
    let mut sum: f64 = 1.0;
    for k in 1..30 {
        term *= (a - k as f64) / x;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        sum += term;
    }
    (a - 1.0) * x.ln() - x - ln_gamma(a) + sum.ln()
}

fn gamma_log_hazard(shape: f64, rate: f64, tau: f64) -> f64 {
    let x = rate * tau;
    let log_density = shape * rate.ln() + (shape - 1.0) * tau.ln() - x - ln_gamma(shape);
    log_density - ln_gamma_upper_regularized(shape, x)
}

/// Solves `f(t) = target` for a nondecreasing `f` with `f(0) = 0`.
fn invert_monotone(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let mut hi = 1.0;
    while f(hi) < target {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simulation_families_have_expected_hazards() {
        let w2 = HazardModel::weibull(2.0, 1.0).unwrap();
        assert!((w2.hazard(1.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(w2.cumulative_hazard(3.0), 9.0);
        let e1 = HazardModel::exponential(1.0).unwrap();
        for tau in [0.1, 1.0, 7.5] {
            assert_eq!(e1.hazard(tau).unwrap(), 1.0);
        }
        let w05 = HazardModel::weibull(0.5, 1.0).unwrap();
        assert!((w05.hazard(4.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((w05.cumulative_hazard(4.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn cumulative_hazard_vanishes_at_zero() {
        for model in [
            HazardModel::exponential(2.0).unwrap(),
            HazardModel::weibull(0.5, 5.0).unwrap(),
            HazardModel::gamma(2.5, 1.5).unwrap(),
        ] {
            assert_eq!(model.cumulative_hazard(0.0), 0.0);
        }
    }

    #[test]
    fn hazard_rejects_nonpositive_age() {
        let m = HazardModel::exponential(1.0).unwrap();
        assert!(matches!(m.hazard(0.0), Err(Error::Domain(_))));
        assert!(m.hazard(-1.0).is_err());
    }

    #[test]
    fn gamma_with_unit_shape_is_exponential() {
        let g = HazardModel::gamma(1.0, 3.0).unwrap();
        for tau in [0.01, 0.5, 2.0, 50.0, 400.0] {
            assert!((g.hazard(tau).unwrap() - 3.0).abs() < 1e-9, "tau={tau}");
            assert!((g.cumulative_hazard(tau) - 3.0 * tau).abs() < 1e-9 * (1.0 + 3.0 * tau));
        }
    }

    #[test]
    fn gamma_tail_stays_finite() {
        let g = HazardModel::gamma(2.0, 1.0).unwrap();
        // hazard of gamma(2,1) is x/(1+x)
        let tau = 900.0;
        assert!((g.hazard(tau).unwrap() - tau / (1.0 + tau)).abs() < 1e-9);
        assert!(g.cumulative_hazard(tau).is_finite());
    }

    #[test]
    fn inverse_matches_forward() {
        for model in [
            HazardModel::exponential(0.7).unwrap(),
            HazardModel::weibull(2.0, 1.0).unwrap(),
            HazardModel::gamma(0.6, 2.0).unwrap(),
            HazardModel::gamma(3.0, 0.5).unwrap(),
        ] {
            for x in [0.01, 0.3, 1.0, 4.0] {
                let t = model.inverse_cumulative_hazard(x);
                assert!((model.cumulative_hazard(t) - x).abs() < 1e-9, "{model} x={x}");
            }
        }
    }

    #[test]
    fn zero_rate_never_contacts() {
        let m = HazardModel::exponential(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(m.sample(&mut rng).is_infinite());
    }

    #[test]
    fn weibull_half_five_survival_matches_closed_form() {
        let m = HazardModel::weibull(0.5, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20_110_101);
        let draws = 100_000;
        let exceed = (0..draws).filter(|_| m.sample(&mut rng) > 1.0).count() as f64 / draws as f64;
        let p = (-(5.0f64).sqrt()).exp();
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((exceed - p).abs() < 3.0 * se, "empirical {exceed} vs {p}");
    }

    #[test]
    fn model_line_round_trip() {
        for line in ["weibull,2,1", "exponential,0.5", "gamma,1.5,3"] {
            let m: HazardModel = line.parse().unwrap();
            assert_eq!(m.to_string(), line);
        }
        assert!("weibull,2".parse::<HazardModel>().is_err());
        assert!("weibull,-1,1".parse::<HazardModel>().is_err());
    }
}
