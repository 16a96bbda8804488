//! Nelson-Aalen and Kaplan-Meier estimates when every infector is known.

use crate::error::{Error, Result};
use crate::record::{EpidemicRecord, RiskSet};
use crate::step::{BandPoint, StepEstimate};

/// Jumps of an estimate before accumulation: distinct ages, event counts and
/// risk-set sizes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JumpTable {
    pub ages: Vec<f64>,
    pub events: Vec<f64>,
    pub at_risk: Vec<f64>,
}

impl JumpTable {
    /// Groups weighted events by exact age and attaches `Y(age)`.
    pub fn from_events(mut events: Vec<(f64, f64)>, risk: &RiskSet) -> Self {
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut table = JumpTable::default();
        for (age, weight) in events {
            match table.ages.last() {
                Some(&last) if last == age => *table.events.last_mut().unwrap() += weight,
                _ => {
                    table.ages.push(age);
                    table.events.push(weight);
                    table.at_risk.push(risk.at(age) as f64);
                }
            }
        }
        table
    }

    pub fn nelson_aalen(&self, horizon: f64) -> StepEstimate {
        let increments = self.events.iter().zip(&self.at_risk).map(|(d, y)| d / y).collect();
        let mut acc = 0.0;
        let variances = self
            .events
            .iter()
            .zip(&self.at_risk)
            .map(|(d, y)| {
                acc += d / (y * y);
                acc
            })
            .collect();
        StepEstimate::cumulative_hazard(self.ages.clone(), increments, variances, horizon)
    }
}

/// Infectiousness ages of the recorded transmissions, one per secondary infection.
pub fn transmission_ages(record: &EpidemicRecord, risk: &RiskSet) -> Result<Vec<f64>> {
    let horizon = risk.horizon();
    record
        .secondary_infections()
        .map(|(j, _)| {
            let v = record.infectors[j].ok_or(Error::MissingInfector(j))?;
            let age = record.contact_age(v, j).ok_or(Error::InvalidInfector { infectee: j, infector: v })?;
            if !(age > 0.0 && age <= horizon) || risk.at(age) == 0 {
                return Err(Error::EventAgeOutOfRange { infectee: j, age, end: horizon });
            }
            Ok(age)
        })
        .collect()
}

fn jump_table(record: &EpidemicRecord, risk: &RiskSet) -> Result<JumpTable> {
    let ages = transmission_ages(record, risk)?;
    Ok(JumpTable::from_events(ages.into_iter().map(|a| (a, 1.0)).collect(), risk))
}

/// `Lambda(tau) = sum d_k / Y(tau_k)` with variance `sum d_k / Y(tau_k)^2`.
pub fn nelson_aalen(record: &EpidemicRecord) -> Result<StepEstimate> {
    let risk = record.risk_set();
    Ok(jump_table(record, &risk)?.nelson_aalen(risk.horizon()))
}

/// Product-limit estimate with Greenwood variance.
pub fn kaplan_meier(record: &EpidemicRecord) -> Result<StepEstimate> {
    let risk = record.risk_set();
    let table = jump_table(record, &risk)?;
    Ok(table.nelson_aalen(risk.horizon()).to_survival(&table.events, &table.at_risk))
}

/// Nelson-Aalen estimate of the normalized cumulative hazard using the
/// mass-action risk set `Y_*`.
pub fn nelson_aalen_mass_action(record: &EpidemicRecord) -> Result<StepEstimate> {
    let risk = record.mass_action_risk_set()?;
    Ok(jump_table(record, &risk)?.nelson_aalen(risk.horizon()))
}

/// Product-limit estimate over the mass-action risk set.
pub fn kaplan_meier_mass_action(record: &EpidemicRecord) -> Result<StepEstimate> {
    let risk = record.mass_action_risk_set()?;
    let table = jump_table(record, &risk)?;
    Ok(table.nelson_aalen(risk.horizon()).to_survival(&table.events, &table.at_risk))
}

/// Pointwise log-transformed limits at every jump age. Survival estimates use
/// the delta-method hazard variance `var(S) / S^2`.
pub fn confidence_band(est: &StepEstimate, alpha: f64) -> Vec<BandPoint> {
    est.times
        .iter()
        .enumerate()
        .map(|(k, &tau)| BandPoint {
            tau,
            estimate: est.values[k],
            variance: est.variances[k],
            interval: est.interval(tau, alpha),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{ContactStructure, Infection, Network, PersonHistory};

    /// Infector 0 with onset 0 and window (0, 3]; contacts 1..=3. Person 1
    /// infected at 1, person 2 at 2 by person 1 (onset 1), person 3 never.
    fn small_record() -> EpidemicRecord {
        let persons = vec![
            PersonHistory::imported(Infection::new(0.0, 0.0, 3.0)),
            PersonHistory::infected(Infection::new(1.0, 0.0, 1.0)),
            PersonHistory::infected(Infection::new(1.5, 0.0, 5.0)),
            PersonHistory::susceptible(),
        ];
        let net = Network::from_undirected_edges(4, [(0, 1), (0, 3), (1, 2)]).unwrap();
        EpidemicRecord::new(persons, ContactStructure::Network(net), 3.0)
            .unwrap()
            .with_infectors(vec![None, Some(0), Some(1), None])
            .unwrap()
    }

    #[test]
    fn no_events_gives_zero() {
        let persons = vec![PersonHistory::imported(Infection::new(0.0, 0.0, 1.0)), PersonHistory::susceptible()];
        let net = Network::from_undirected_edges(2, [(0, 1)]).unwrap();
        let rec = EpidemicRecord::new(persons, ContactStructure::Network(net), 5.0).unwrap();
        let na = nelson_aalen(&rec).unwrap();
        assert!(na.is_empty());
        assert_eq!(na.value_at(0.7), 0.0);
        assert_eq!(na.variance_at(0.7), 0.0);
        assert_eq!(kaplan_meier(&rec).unwrap().value_at(0.7), 1.0);
    }

    #[test]
    fn hand_evaluated_jumps() {
        // ages 1 (Y=3) and 2 (Y=1), built directly from a risk set
        let risk = RiskSet::from_windows(vec![(0.5, 1), (1.0, 1), (2.0, 1)]);
        let table = JumpTable::from_events(vec![(2.0, 1.0), (1.0, 1.0)], &risk);
        assert_eq!(table.at_risk, vec![2.0, 1.0]);
        let risk = RiskSet::from_windows(vec![(1.5, 1), (1.0, 1), (2.0, 1)]);
        let table = JumpTable::from_events(vec![(2.0, 1.0), (1.0, 1.0)], &risk);
        assert_eq!(table.at_risk, vec![3.0, 1.0]);
        let na = table.nelson_aalen(2.0);
        assert!((na.value_at(2.0) - 4.0 / 3.0).abs() < 1e-15);
        assert!((na.variance_at(2.0) - 10.0 / 9.0).abs() < 1e-15);
        let km = na.to_survival(&table.events, &table.at_risk);
        assert!((km.value_at(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.value_at(2.0), 0.0);
    }

    #[test]
    fn record_level_estimate() {
        let rec = small_record();
        let na = nelson_aalen(&rec).unwrap();
        // windows: 0->1 (0,1], 0->3 (0,3], 1->0 none (0 infected at 0 < onset 1),
        // 1->2 (0,0.5]; events at 1 (0->1) and 0.5 (1->2)
        assert_eq!(na.times, vec![0.5, 1.0]);
        assert!((na.increments[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((na.increments[1] - 1.0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn missing_infector_is_an_error() {
        let mut rec = small_record();
        rec.infectors[2] = None;
        assert!(matches!(nelson_aalen(&rec), Err(Error::MissingInfector(2))));
    }

    #[test]
    fn tied_events_merge() {
        let risk = RiskSet::from_windows(vec![(3.0, 4)]);
        let table = JumpTable::from_events(vec![(1.0, 1.0), (1.0, 1.0)], &risk);
        let na = table.nelson_aalen(3.0);
        assert_eq!(na.len(), 1);
        assert_eq!(na.increments[0], 0.5);
        assert_eq!(na.variances[0], 2.0 / 16.0);
    }

    #[test]
    fn mass_action_single_event_jump_is_one() {
        let persons = vec![
            PersonHistory::imported(Infection::new(0.0, 0.0, 1.0)),
            PersonHistory::infected(Infection::new(0.5, 0.0, 0.2)),
            PersonHistory::susceptible(),
        ];
        let rec = EpidemicRecord::new(persons, ContactStructure::MassAction { n: 3 }, 0.5)
            .unwrap()
            .with_infectors(vec![None, Some(0), None])
            .unwrap();
        let na = nelson_aalen_mass_action(&rec).unwrap();
        assert_eq!(na.times, vec![0.5]);
        assert_eq!(na.increments, vec![1.0]);
    }

    #[test]
    fn band_brackets_estimate() {
        let rec = small_record();
        for est in [nelson_aalen(&rec).unwrap(), kaplan_meier(&rec).unwrap()] {
            for p in confidence_band(&est, 0.05) {
                if !p.interval.degenerate {
                    assert!(p.interval.lower <= p.estimate && p.estimate <= p.interval.upper);
                }
            }
        }
    }
}
