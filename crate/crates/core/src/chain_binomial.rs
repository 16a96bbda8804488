//! Discrete-time contact intervals and the chain-binomial likelihood.
//!
//! Times are whole days. An infector whose infectiousness starts on day `o`
//! can make infectious contact on days `o + 1 ..= o + D`; the infectiousness
//! age of day `d` is `d - o`. Each day every infectious-susceptible pair
//! escapes independently with probability `1 - lambda(age)`.

use crate::error::{Error, Result};
use crate::record::EpidemicRecord;

/// Daily conditional contact probabilities `lambda_1 ..= lambda_D`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHazard {
    lambda: Vec<f64>,
}

impl DiscreteHazard {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if let Some((d, &l)) = lambda.iter().enumerate().find(|(_, l)| !(0.0..=1.0).contains(*l)) {
            return Err(Error::InvalidParameter(format!("daily contact probability {l} on day {} outside [0, 1]", d + 1)));
        }
        Ok(Self { lambda })
    }

    pub fn constant(lambda: f64, days: usize) -> Result<Self> {
        Self::new(vec![lambda; days])
    }

    pub fn days(&self) -> usize {
        self.lambda.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.lambda
    }

    /// `lambda(age)` for `age` in `1..=D`.
    pub fn at(&self, age: i64) -> Result<f64> {
        if age < 1 || age as usize > self.lambda.len() {
            return Err(Error::Domain(age as f64));
        }
        Ok(self.lambda[age as usize - 1])
    }

    /// `ln S(d) = sum_{e <= d} ln(1 - lambda_e)`; `d = 0` gives 0.
    pub fn log_survival(&self, d: usize) -> Result<f64> {
        if d > self.lambda.len() {
            return Err(Error::Domain(d as f64));
        }
        Ok(self.lambda[..d].iter().map(|l| (-l).ln_1p()).sum())
    }

    pub fn survival(&self, d: usize) -> Result<f64> {
        Ok(self.log_survival(d)?.exp())
    }

    /// Probability of at least one infectious contact over the whole table.
    pub fn contact_probability(&self) -> f64 {
        -self.log_survival(self.days()).unwrap().exp_m1()
    }
}

fn whole_day(x: f64, what: &str, person: usize) -> Result<i64> {
    if x.fract() != 0.0 || !x.is_finite() {
        return Err(Error::InvalidRecord(format!("{what} {x} of person {person} is not a whole day")));
    }
    Ok(x as i64)
}

/// Per-person daily schedule: infection day, infectiousness onset day and
/// number of infectious days.
#[derive(Debug, Clone, Copy)]
struct DailyInfection {
    day: i64,
    onset: i64,
    days: i64,
}

fn daily_schedule(record: &EpidemicRecord) -> Result<Vec<Option<DailyInfection>>> {
    record
        .persons
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.infection
                .map(|inf| {
                    let day = whole_day(inf.time, "infection time", i)?;
                    let latent = whole_day(inf.latent, "latent period", i)?;
                    let days = whole_day(inf.infectious, "infectious period", i)?;
                    Ok(DailyInfection { day, onset: day + latent, days })
                })
                .transpose()
        })
        .collect()
}

/// Exposure counts of one record: for each secondary infection the ages of its
/// candidate infectors, and the number of escaped pair-days at each age.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DailyExposure {
    pub infections: Vec<Vec<usize>>,
    /// `escapes[a - 1]` counts pairs that escaped through age `a`.
    pub escapes: Vec<u64>,
}

impl DailyExposure {
    pub fn from_record(record: &EpidemicRecord) -> Result<Self> {
        let schedule = daily_schedule(record)?;
        let end = whole_day(record.end_time, "end time", 0)?;
        let n = record.n();
        let mut out = DailyExposure::default();
        let contacts = |j: usize| (0..n).filter(move |&i| i != j && record.contacts.can_contact(i, j));
        for j in 0..n {
            // last day anyone could have reached j
            let last = match schedule[j] {
                Some(dst) => dst.day - 1,
                None => end,
            };
            for i in contacts(j) {
                let Some(src) = schedule[i] else { continue };
                let exposed = (last - src.onset).min(src.days);
                if exposed > 0 {
                    let k = exposed as usize;
                    if out.escapes.len() < k {
                        out.escapes.resize(k, 0);
                    }
                    out.escapes[k - 1] += 1;
                }
            }
            if record.persons[j].imported {
                continue;
            }
            let Some(dst) = schedule[j] else { continue };
            let ages: Vec<usize> = contacts(j)
                .filter_map(|i| schedule[i])
                .filter_map(|src| {
                    let a = dst.day - src.onset;
                    (a >= 1 && a <= src.days).then_some(a as usize)
                })
                .collect();
            if ages.is_empty() {
                return Err(Error::EmptyInfectiousSet(j));
            }
            out.infections.push(ages);
        }
        Ok(out)
    }

    /// Exposure totals of several records, e.g. independent households.
    pub fn pooled(records: &[EpidemicRecord]) -> Result<Self> {
        let mut out = DailyExposure::default();
        for r in records {
            let e = Self::from_record(r)?;
            out.infections.extend(e.infections);
            if out.escapes.len() < e.escapes.len() {
                out.escapes.resize(e.escapes.len(), 0);
            }
            for (k, c) in e.escapes.into_iter().enumerate() {
                out.escapes[k] += c;
            }
        }
        Ok(out)
    }

    pub fn log_likelihood(&self, hazard: &DiscreteHazard) -> Result<f64> {
        let mut ll = 0.0;
        for ages in &self.infections {
            let mut log_escape = 0.0;
            for &a in ages {
                log_escape += (-hazard.at(a as i64)?).ln_1p();
            }
            // ln(1 - exp(log_escape)), -inf when every candidate surely escapes
            ll += (-log_escape.exp_m1()).ln();
        }
        for (k, &count) in self.escapes.iter().enumerate() {
            if count > 0 {
                ll += count as f64 * hazard.log_survival(k + 1)?;
            }
        }
        Ok(ll)
    }
}

/// Exact chain-binomial log likelihood of a daily record.
pub fn chain_binomial_loglik(record: &EpidemicRecord, hazard: &DiscreteHazard) -> Result<f64> {
    DailyExposure::from_record(record)?.log_likelihood(hazard)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EscapeFit {
    pub hazard: DiscreteHazard,
    /// Daily contact probability `lambda` and its 95% profile-likelihood limits.
    pub lambda: f64,
    pub lambda_ci: (f64, f64),
    /// Probability of infectious contact over `D` days, `1 - (1 - lambda)^D`.
    pub contact_probability: f64,
    pub contact_ci: (f64, f64),
    pub log_likelihood: f64,
}

/// 95% point of the chi-square distribution with one degree of freedom.
const CHISQ1_95: f64 = 3.841_458_820_694_124;

/// Maximum-likelihood constant daily contact probability over `days` days.
pub fn fit_escape_probability(records: &[EpidemicRecord], days: usize) -> Result<EscapeFit> {
    if days == 0 {
        return Err(Error::InvalidParameter("infectious period of zero days".into()));
    }
    let exposure = DailyExposure::pooled(records)?;
    let trials: u64 = exposure.escapes.iter().sum();
    if exposure.infections.is_empty() && trials == 0 {
        return Err(Error::DegenerateData("no transmissions and no exposure".into()));
    }
    if exposure.escapes.len() > days || exposure.infections.iter().flatten().any(|&a| a > days) {
        return Err(Error::InvalidParameter(format!("records reach beyond the {days}-day table")));
    }
    let ll = |l: f64| exposure.log_likelihood(&DiscreteHazard::constant(l, days).unwrap()).unwrap();
    // the log likelihood is concave in lambda
    let lambda = if exposure.infections.is_empty() {
        0.0
    } else if trials == 0 {
        1.0
    } else {
        // the score is decreasing; bisect for its root
        let score = |l: f64| {
            let mut u = 0.0;
            for ages in &exposure.infections {
                let k = ages.len() as i32;
                u += k as f64 * (1.0 - l).powi(k - 1) / -((k as f64) * (-l).ln_1p()).exp_m1();
            }
            let pair_days: f64 = exposure.escapes.iter().enumerate().map(|(d, &c)| (d + 1) as f64 * c as f64).sum();
            u - pair_days / (1.0 - l)
        };
        let (mut a, mut b) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if score(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    };
    let best = ll(lambda);
    let inside = |l: f64| 2.0 * (best - ll(l)) <= CHISQ1_95;
    let bisect = |mut inner: f64, mut outer: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (inner + outer);
            if inside(mid) {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        0.5 * (inner + outer)
    };
    let lo = if inside(0.0) { 0.0 } else { bisect(lambda, 0.0) };
    let hi = if inside(1.0) { 1.0 } else { bisect(lambda, 1.0) };
    let over_period = |l: f64| 1.0 - (1.0 - l).powi(days as i32);
    Ok(EscapeFit {
        hazard: DiscreteHazard::constant(lambda, days)?,
        lambda,
        lambda_ci: (lo, hi),
        contact_probability: over_period(lambda),
        contact_ci: (over_period(lo), over_period(hi)),
        log_likelihood: best,
    })
}
