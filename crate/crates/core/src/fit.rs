//! Maximum-likelihood fits of parametric contact-interval families.
//!
//! The log likelihood sums, over secondary infections, the log of the total
//! hazard from the candidate infectors at the infection time, minus the
//! cumulative hazard accrued over every pair's observation window.

use crate::error::{Error, Result};
use crate::hazard::{Family, HazardModel};
use crate::optimize::{invert_small, nelder_mead, numeric_hessian, NelderMeadOptions};
use crate::record::{CandidateSet, EpidemicRecord, RiskSet};

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricFit {
    pub model: HazardModel,
    pub log_likelihood: f64,
    /// Standard errors of the natural parameters from the numeric Hessian;
    /// `None` at a boundary or when the Hessian is singular.
    pub std_errors: Option<Vec<f64>>,
    /// Set when the maximum lies on the boundary of the parameter space.
    pub boundary: bool,
    pub iterations: usize,
}

/// Log likelihood of `model` given candidate sets and pair windows.
pub fn log_likelihood(sets: &[CandidateSet], risk: &RiskSet, model: &HazardModel) -> Result<f64> {
    let mut ll = 0.0;
    for s in sets {
        let mut total = 0.0;
        for c in &s.candidates {
            total += model.hazard(c.age)?;
        }
        ll += total.ln();
    }
    for (end, mult) in risk.windows() {
        ll -= mult as f64 * model.cumulative_hazard(end);
    }
    Ok(ll)
}

pub fn fit_parametric(record: &EpidemicRecord, family: Family) -> Result<ParametricFit> {
    let sets = record.candidate_sets()?;
    fit_candidate_sets(&sets, &record.risk_set(), family)
}

pub fn fit_candidate_sets(sets: &[CandidateSet], risk: &RiskSet, family: Family) -> Result<ParametricFit> {
    let exposure: f64 = risk.windows().map(|(end, m)| end * m as f64).sum();
    if !(exposure > 0.0) {
        return Err(Error::DegenerateData("no exposure time".into()));
    }
    let events = sets.len() as f64;
    if sets.is_empty() {
        if family == Family::Exponential {
            let model = HazardModel::exponential(0.0)?;
            return Ok(ParametricFit { model, log_likelihood: 0.0, std_errors: None, boundary: true, iterations: 0 });
        }
        return Err(Error::DegenerateData(format!("no transmissions to fit a {} model", family.name())));
    }
    let rate0 = events / exposure;
    let start: Vec<f64> = match family {
        Family::Exponential => vec![rate0.ln()],
        Family::Weibull | Family::Gamma => vec![0.0, rate0.ln()],
    };
    let params = |eta: &[f64]| -> Vec<f64> {
        match family {
            Family::Exponential => vec![eta[0].exp()],
            // Weibull and gamma are stored as (shape, rate)
            _ => vec![eta[0].exp(), eta[1].exp()],
        }
    };
    let negative_ll = |eta: &[f64]| -> f64 {
        match HazardModel::from_params(family, &params(eta)) {
            Ok(model) => log_likelihood(sets, risk, &model).map_or(f64::INFINITY, |ll| -ll),
            Err(_) => f64::INFINITY,
        }
    };
    let min = nelder_mead(negative_ll, &start, NelderMeadOptions::default())?;
    let theta = params(&min.x);
    let model = HazardModel::from_params(family, &theta)?;
    let hess = numeric_hessian(negative_ll, &min.x);
    let std_errors = invert_small(&hess).and_then(|cov| {
        let se: Vec<f64> = (0..theta.len()).map(|k| theta[k] * cov[k][k].sqrt()).collect();
        se.iter().all(|s| s.is_finite()).then_some(se)
    });
    Ok(ParametricFit { model, log_likelihood: -min.value, std_errors, boundary: false, iterations: min.iterations })
}
