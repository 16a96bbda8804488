//! Marginal Nelson-Aalen estimation when infectors are unobserved, by EM.
//!
//! Each secondary infection `j` spreads one unit of event mass over its
//! candidate infectors with probabilities proportional to the current hazard at
//! their infectiousness ages. The hazard is re-estimated by smoothing the
//! weighted Nelson-Aalen estimate; the loop runs smooth, E, M until the
//! estimate stops moving on a fixed grid of ages.

use crate::error::{Error, Result};
use crate::hazard::HazardModel;
use crate::nelson_aalen::JumpTable;
use crate::record::{CandidateSet, EpidemicRecord, RiskSet};
use crate::smoothing::{smooth, SmootherConfig};
use crate::step::{EstimateKind, StepEstimate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedCandidate {
    pub infector: usize,
    pub age: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedInfectee {
    pub infectee: usize,
    pub candidates: Vec<WeightedCandidate>,
}

/// Infector probabilities for every secondary infection.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedEventSet {
    pub infectees: Vec<WeightedInfectee>,
}

impl WeightedEventSet {
    /// Equal weight on every candidate, i.e. every transmission network
    /// equally likely.
    pub fn uniform(sets: &[CandidateSet]) -> Self {
        let infectees = sets
            .iter()
            .map(|s| {
                let p = 1.0 / s.candidates.len() as f64;
                WeightedInfectee {
                    infectee: s.infectee,
                    candidates: s.candidates.iter().map(|c| WeightedCandidate { infector: c.infector, age: c.age, p }).collect(),
                }
            })
            .collect();
        Self { infectees }
    }

    /// `p_ij = lambda(tau_ij) / sum_k lambda(tau_kj)`.
    pub fn from_hazard(sets: &[CandidateSet], mut hazard: impl FnMut(f64) -> Result<f64>) -> Result<Self> {
        let mut infectees = Vec::with_capacity(sets.len());
        for s in sets {
            let rates = s.candidates.iter().map(|c| hazard(c.age)).collect::<Result<Vec<f64>>>()?;
            let total: f64 = rates.iter().sum();
            if !(total > 0.0) || !total.is_finite() {
                return Err(Error::DegenerateHazard(s.infectee));
            }
            let candidates = s
                .candidates
                .iter()
                .zip(&rates)
                .map(|(c, r)| WeightedCandidate { infector: c.infector, age: c.age, p: r / total })
                .collect();
            infectees.push(WeightedInfectee { infectee: s.infectee, candidates });
        }
        Ok(Self { infectees })
    }

    pub fn candidate_event_count(&self) -> usize {
        self.infectees.iter().map(|w| w.candidates.len()).sum()
    }

    /// Probability of one transmission network, given as the chosen candidate
    /// index for each infectee.
    pub fn network_probability(&self, choice: &[usize]) -> f64 {
        self.infectees.iter().zip(choice).map(|(w, &c)| w.candidates[c].p).product()
    }

    fn events(&self) -> Vec<(f64, f64)> {
        self.infectees.iter().flat_map(|w| w.candidates.iter().map(|c| (c.age, c.p))).collect()
    }
}

/// Weights implied by `model` for every candidate infector in `record`.
pub fn infector_probabilities(record: &EpidemicRecord, model: &HazardModel) -> Result<WeightedEventSet> {
    let sets = record.candidate_sets()?;
    WeightedEventSet::from_hazard(&sets, |age| model.hazard(age))
}

/// A right-constant step function starting at zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepFunction {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepFunction {
    pub fn at(&self, tau: f64) -> f64 {
        let k = self.times.partition_point(|&t| t <= tau);
        if k == 0 { 0.0 } else { self.values[k - 1] }
    }
}

/// Conditional-variance formula
/// `2 sum p / Y^2 - sum_j (sum_i p_ij / Y(tau_ij))^2` over events up to `tau`.
/// Unlike a Nelson-Aalen variance it can decrease between jumps of different
/// infectees.
pub fn marginal_variance_given(weights: &WeightedEventSet, risk: &RiskSet) -> StepFunction {
    let mut events: Vec<(f64, usize, f64)> = weights
        .infectees
        .iter()
        .enumerate()
        .flat_map(|(slot, w)| w.candidates.iter().map(move |c| (c.age, slot, c.p)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut partial = vec![0.0; weights.infectees.len()];
    let mut sum_sq = 0.0;
    let mut first = 0.0;
    let mut out = StepFunction::default();
    let mut k = 0;
    while k < events.len() {
        let age = events[k].0;
        let y = risk.at(age) as f64;
        while k < events.len() && events[k].0 == age {
            let (_, slot, p) = events[k];
            let x = p / y;
            first += p / (y * y);
            let old = partial[slot];
            partial[slot] = old + x;
            sum_sq += partial[slot] * partial[slot] - old * old;
            k += 1;
        }
        out.times.push(age);
        out.values.push((2.0 * first - sum_sq).max(0.0));
    }
    out
}

/// Marginal Nelson-Aalen estimate `sum p_ij / Y(tau_ij)` with the
/// conditional-variance formula attached.
pub fn marginal_estimate(weights: &WeightedEventSet, risk: &RiskSet) -> StepEstimate {
    let table = JumpTable::from_events(weights.events(), risk);
    let mut est = table.nelson_aalen(risk.horizon());
    est.variances = marginal_variance_given(weights, risk).values;
    est
}

pub fn marginal_nelson_aalen_given(record: &EpidemicRecord, model: &HazardModel) -> Result<StepEstimate> {
    let weights = infector_probabilities(record, model)?;
    Ok(marginal_estimate(&weights, &record.risk_set()))
}

pub fn marginal_variance(record: &EpidemicRecord, weights: &WeightedEventSet) -> StepFunction {
    marginal_variance_given(weights, &record.risk_set())
}

/// Product-limit companion of a marginal estimate; stored variance is
/// `S^2 * sigma^2`.
pub fn marginal_survival(est: &StepEstimate) -> StepEstimate {
    let mut s = 1.0;
    let mut values = Vec::with_capacity(est.len());
    let mut variances = Vec::with_capacity(est.len());
    for k in 0..est.len() {
        s *= (1.0 - est.increments[k]).max(0.0);
        values.push(s);
        variances.push(s * s * est.variances[k]);
    }
    StepEstimate {
        kind: EstimateKind::Survival,
        times: est.times.clone(),
        increments: est.increments.clone(),
        values,
        variances,
        horizon: est.horizon,
    }
}

pub const DEFAULT_GRID_PERCENTILES: [f64; 19] =
    [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    /// Stop once the L1 difference falls below this, after `min_iterations`.
    pub tolerance: f64,
    pub min_iterations: usize,
    pub max_iterations: usize,
    pub smoother: SmootherConfig,
    /// Percentiles of the possible contact intervals where successive
    /// estimates are compared.
    pub grid_percentiles: Vec<f64>,
    /// Starting hazard; `None` gives uniform weights.
    pub initial: Option<HazardModel>,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.0005,
            min_iterations: 5,
            max_iterations: 50,
            smoother: SmootherConfig::default(),
            grid_percentiles: DEFAULT_GRID_PERCENTILES.to_vec(),
            initial: None,
        }
    }
}

impl EmConfig {
    pub fn mass_action() -> Self {
        Self { tolerance: 0.005, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!("EM tolerance {}", self.tolerance)));
        }
        if self.min_iterations > self.max_iterations || self.max_iterations == 0 {
            return Err(Error::InvalidParameter(format!(
                "EM iterations min {} max {}",
                self.min_iterations, self.max_iterations
            )));
        }
        if self.grid_percentiles.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("grid percentiles must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmIteration {
    pub iteration: usize,
    pub l1_difference: f64,
    /// Set when the estimate had too few jumps to smooth and a flat hazard was used.
    pub flat_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmResult {
    pub cumulative_hazard: StepEstimate,
    pub survival: StepEstimate,
    pub weights: WeightedEventSet,
    pub log: Vec<EmIteration>,
    pub converged: bool,
    pub grid: Vec<f64>,
}

impl EmResult {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }
}

pub fn em_estimate(record: &EpidemicRecord, config: &EmConfig) -> Result<EmResult> {
    let risk = record.risk_set();
    let sets = record.candidate_sets()?;
    run_em(&sets, &risk, &risk, config)
}

/// The same loop with `Y_*` in place of `Y`. The grid still comes from the
/// possible contact intervals of the full population.
pub fn em_estimate_mass_action(record: &EpidemicRecord, config: &EmConfig) -> Result<EmResult> {
    let risk = record.mass_action_risk_set()?;
    let sets = record.candidate_sets()?;
    run_em(&sets, &risk, &record.risk_set(), config)
}

/// Runs EM on candidate sets directly; `grid_source` supplies the L1 grid.
pub fn run_em(sets: &[CandidateSet], risk: &RiskSet, grid_source: &RiskSet, config: &EmConfig) -> Result<EmResult> {
    config.validate()?;
    let grid: Vec<f64> = config.grid_percentiles.iter().filter_map(|&p| grid_source.quantile(p)).collect();
    let mut weights = match &config.initial {
        Some(model) => WeightedEventSet::from_hazard(sets, |a| model.hazard(a))?,
        None => WeightedEventSet::uniform(sets),
    };
    let mut current = marginal_estimate(&weights, risk);
    let mut log = Vec::new();
    let mut converged = false;
    for iteration in 1..=config.max_iterations {
        let (next_weights, flat_fallback) = match smooth(&current, &config.smoother) {
            Ok(model) => (WeightedEventSet::from_hazard(sets, |a| model.hazard(a))?, false),
            Err(Error::TooFewJumps { .. }) => (WeightedEventSet::uniform(sets), true),
            Err(e) => return Err(e),
        };
        let next = marginal_estimate(&next_weights, risk);
        let l1_difference = l1_difference(&current, &next, &grid);
        log.push(EmIteration { iteration, l1_difference, flat_fallback });
        weights = next_weights;
        current = next;
        if iteration >= config.min_iterations && l1_difference < config.tolerance {
            converged = true;
            break;
        }
    }
    let survival = marginal_survival(&current);
    Ok(EmResult { cumulative_hazard: current, survival, weights, log, converged, grid })
}

/// Mean absolute difference of two estimates over `grid`.
pub fn l1_difference(a: &StepEstimate, b: &StepEstimate, grid: &[f64]) -> f64 {
    if grid.is_empty() {
        return 0.0;
    }
    grid.iter().map(|&g| (a.value_at(g) - b.value_at(g)).abs()).sum::<f64>() / grid.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nelson_aalen::nelson_aalen;
    use crate::record::{Candidate, ContactStructure, Infection, Network, PersonHistory};

    fn set(infectee: usize, ages: &[f64]) -> CandidateSet {
        CandidateSet {
            infectee,
            candidates: ages.iter().enumerate().map(|(i, &age)| Candidate { infector: i, age }).collect(),
        }
    }

    #[test]
    fn weights_follow_hazard_ratio() {
        let w = WeightedEventSet::from_hazard(&[set(9, &[1.0, 2.0])], |t| Ok(2.0 * t)).unwrap();
        let p: Vec<f64> = w.infectees[0].candidates.iter().map(|c| c.p).collect();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15);
        let w = WeightedEventSet::from_hazard(&[set(9, &[1.5, 1.5])], |t| Ok(t.ln() + 7.0)).unwrap();
        assert_eq!(w.infectees[0].candidates[0].p, 0.5);
        let w = WeightedEventSet::from_hazard(&[set(9, &[0.3])], |_| Ok(1e-300)).unwrap();
        assert_eq!(w.infectees[0].candidates[0].p, 1.0);
    }

    #[test]
    fn all_zero_hazard_is_degenerate() {
        let r = WeightedEventSet::from_hazard(&[set(4, &[1.0, 2.0])], |_| Ok(0.0));
        assert!(matches!(r, Err(Error::DegenerateHazard(4))));
    }

    #[test]
    fn hand_evaluated_marginal_estimate() {
        // one infectee, candidates at ages 1 (Y=2) and 2 (Y=1), equal weights
        let risk = RiskSet::from_windows(vec![(1.0, 1), (2.0, 1)]);
        let w = WeightedEventSet::uniform(&[set(0, &[1.0, 2.0])]);
        let est = marginal_estimate(&w, &risk);
        assert_eq!(est.increments, vec![0.25, 0.5]);
        assert_eq!(est.value_at(2.0), 0.75);
        assert!((est.variance_at(2.0) - 0.6875).abs() < 1e-15);
    }

    #[test]
    fn singleton_sets_reduce_to_nelson_aalen_variance() {
        let risk = RiskSet::from_windows(vec![(1.0, 2), (2.0, 3), (4.0, 1)]);
        let w = WeightedEventSet::uniform(&[set(0, &[1.0]), set(1, &[1.0]), set(2, &[3.0]), set(3, &[0.5])]);
        let est = marginal_estimate(&w, &risk);
        let table = JumpTable::from_events(vec![(1.0, 1.0), (1.0, 1.0), (3.0, 1.0), (0.5, 1.0)], &risk);
        let na = table.nelson_aalen(4.0);
        for k in 0..na.len() {
            assert!((est.values[k] - na.values[k]).abs() < 1e-12);
            assert!((est.variances[k] - na.variances[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_of_no_events_is_zero() {
        let v = marginal_variance_given(&WeightedEventSet::default(), &RiskSet::default());
        assert_eq!(v.at(3.0), 0.0);
    }

    /// Three secondary infections with overlapping candidate sets.
    fn three_infection_record() -> EpidemicRecord {
        let persons = vec![
            PersonHistory::imported(Infection::new(0.0, 0.0, 4.0)),
            PersonHistory::imported(Infection::new(0.0, 0.5, 3.0)),
            PersonHistory::infected(Infection::new(1.0, 0.2, 2.0)),
            PersonHistory::infected(Infection::new(2.0, 0.0, 1.0)),
            PersonHistory::infected(Infection::new(2.6, 0.0, 1.0)),
            PersonHistory::susceptible(),
        ];
        let edges = [(0, 2), (1, 2), (0, 3), (1, 3), (2, 3), (2, 4), (3, 4), (0, 5), (4, 5)];
        let net = Network::from_undirected_edges(6, edges).unwrap();
        EpidemicRecord::new(persons, ContactStructure::Network(net), 3.0).unwrap()
    }

    #[test]
    fn marginal_estimate_is_network_average() {
        let rec = three_infection_record();
        let model = HazardModel::weibull(2.0, 0.7).unwrap();
        let weights = infector_probabilities(&rec, &model).unwrap();
        let est = marginal_nelson_aalen_given(&rec, &model).unwrap();
        let sizes: Vec<usize> = weights.infectees.iter().map(|w| w.candidates.len()).collect();
        assert!(sizes.iter().product::<usize>() > 1);
        let grid: Vec<f64> = (1..=60).map(|k| k as f64 * 0.05).collect();
        let mut expected = vec![0.0; grid.len()];
        let mut choice = vec![0; sizes.len()];
        loop {
            let pr = weights.network_probability(&choice);
            let mut r = rec.clone();
            for (w, &c) in weights.infectees.iter().zip(&choice) {
                r.infectors[w.infectee] = Some(w.candidates[c].infector);
            }
            let na = nelson_aalen(&r).unwrap();
            for (e, &g) in expected.iter_mut().zip(&grid) {
                *e += pr * na.value_at(g);
            }
            // odometer over networks
            let mut k = 0;
            while k < choice.len() {
                choice[k] += 1;
                if choice[k] < sizes[k] {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == choice.len() {
                break;
            }
        }
        for (e, &g) in expected.iter().zip(&grid) {
            assert!((e - est.value_at(g)).abs() < 1e-10, "tau={g}");
        }
    }

    #[test]
    fn fully_observed_em_is_nelson_aalen() {
        let mut rec = three_infection_record();
        rec.infectors = vec![None, None, Some(0), Some(2), Some(3), None];
        rec.validate().unwrap();
        let em = em_estimate(&rec, &EmConfig::default()).unwrap();
        let na = nelson_aalen(&rec).unwrap();
        assert_eq!(em.cumulative_hazard.times, na.times);
        for k in 0..na.len() {
            assert!((em.cumulative_hazard.values[k] - na.values[k]).abs() < 1e-12);
            assert!((em.cumulative_hazard.variances[k] - na.variances[k]).abs() < 1e-12);
        }
        assert!(em.converged);
        assert!(em.log.iter().all(|it| it.l1_difference == 0.0));
    }

    #[test]
    fn raw_increment_feedback_degenerates() {
        // feeding back unsmoothed increments gives p^k proportional to p^0 / Y^k
        let rec = three_infection_record();
        let risk = rec.risk_set();
        let sets = rec.candidate_sets().unwrap();
        let mut weights = WeightedEventSet::uniform(&sets);
        let ages: Vec<f64> = weights.infectees.iter().flat_map(|w| w.candidates.iter().map(|c| c.age)).collect();
        let mut sorted = ages.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        assert_eq!(sorted.len(), ages.len(), "fixture needs distinct ages");
        for k in 1..=4 {
            let est = marginal_estimate(&weights, &risk);
            weights = WeightedEventSet::from_hazard(&sets, |a| Ok(est.increments[est.index_at(a).unwrap()])).unwrap();
            for w in &weights.infectees {
                let raw: Vec<f64> = w.candidates.iter().map(|c| (risk.at(c.age) as f64).powi(-k)).collect();
                let total: f64 = raw.iter().sum();
                for (c, r) in w.candidates.iter().zip(&raw) {
                    assert!((c.p - r / total).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn weights_normalize() {
        let rec = three_infection_record();
        let w = infector_probabilities(&rec, &HazardModel::gamma(0.5, 2.0).unwrap()).unwrap();
        for inf in &w.infectees {
            let s: f64 = inf.candidates.iter().map(|c| c.p).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn m_step_maximizes_expected_log_likelihood() {
        // G(h) = sum_k D_k ln h_k + (Y_k - D_k) ln(1 - h_k) is maximized at h = D / Y
        let rec = three_infection_record();
        let risk = rec.risk_set();
        let w = infector_probabilities(&rec, &HazardModel::weibull(1.5, 1.0).unwrap()).unwrap();
        let table = JumpTable::from_events(w.events(), &risk);
        // 0 * ln 0 taken as 0 when the whole risk set fails
        let xlogy = |x: f64, y: f64| if x > 0.0 { x * y.ln() } else { 0.0 };
        let g = |h: &[f64]| -> f64 {
            (0..h.len())
                .map(|k| xlogy(table.events[k], h[k]) + xlogy(table.at_risk[k] - table.events[k], 1.0 - h[k]))
                .sum()
        };
        let best: Vec<f64> = table.events.iter().zip(&table.at_risk).map(|(d, y)| d / y).collect();
        let base = g(&best);
        for k in 0..best.len() {
            for f in [0.9, 1.1] {
                let mut h = best.clone();
                h[k] = (h[k] * f).min(0.999);
                assert!(g(&h) <= base + 1e-12);
            }
        }
    }
}
