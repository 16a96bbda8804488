//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use contact_core::chain_binomial::DiscreteHazard;
use contact_core::record::{ContactStructure, EpidemicRecord, Infection, Network, PersonHistory};
use contact_core::simulate::{simulate_on, DurationModel, SimulationConfig, SimulationMode};
use contact_core::HazardModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Observation window of the ordered pair `(i, j)`, if any: the part of `i`'s
/// infectious period before `j`'s infection and before `T`.
pub fn pair_window(rec: &EpidemicRecord, i: usize, j: usize) -> Option<f64> {
    if i == j || !rec.contacts.can_contact(i, j) {
        return None;
    }
    let src = rec.persons[i].infection?;
    let onset = src.time + src.latent;
    let mut w = src.infectious.min(rec.end_time - onset);
    if let Some(dst) = rec.persons[j].infection {
        w = w.min(dst.time - onset);
    }
    (w > 0.0).then_some(w)
}

/// Number of pairs under observation at infectiousness age `a`.
pub fn at_risk(rec: &EpidemicRecord, a: f64) -> usize {
    let n = rec.n();
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| pair_window(rec, i, j).is_some_and(|w| w >= a)).count()
}

/// Nelson-Aalen at `tau` as a plain double sum over infected pairs, using the
/// infectors in `infector`.
pub fn brute_nelson_aalen(rec: &EpidemicRecord, infector: &[Option<usize>], tau: f64) -> f64 {
    let mut total = 0.0;
    for (j, v) in infector.iter().enumerate() {
        let Some(i) = *v else { continue };
        let src = rec.persons[i].infection.unwrap();
        let dst = rec.persons[j].infection.unwrap();
        let age = dst.time - (src.time + src.latent);
        if age <= tau {
            total += 1.0 / at_risk(rec, age) as f64;
        }
    }
    total
}

/// Infectious set of `j` recomputed from the raw histories.
pub fn brute_infectious_set(rec: &EpidemicRecord, j: usize) -> Vec<usize> {
    let t = rec.persons[j].infection.unwrap().time;
    (0..rec.n())
        .filter(|&i| i != j && rec.contacts.can_contact(i, j))
        .filter(|&i| {
            rec.persons[i].infection.is_some_and(|src| {
                let onset = src.time + src.latent;
                t > onset && t <= src.time + (src.latent + src.infectious)
            })
        })
        .collect()
}

/// `sum_v Pr(v) * NA_v(tau)` over every transmission network consistent with
/// the record, with `Pr(v)` the product of normalized hazards.
pub fn enumerated_marginal(rec: &EpidemicRecord, model: &HazardModel, tau: f64) -> f64 {
    let secondaries: Vec<usize> = (0..rec.n()).filter(|&j| rec.persons[j].infection.is_some() && !rec.persons[j].imported).collect();
    let sets: Vec<Vec<usize>> = secondaries.iter().map(|&j| brute_infectious_set(rec, j)).collect();
    let age = |i: usize, j: usize| {
        let src = rec.persons[i].infection.unwrap();
        rec.persons[j].infection.unwrap().time - (src.time + src.latent)
    };
    let mut total = 0.0;
    let mut choice = vec![0usize; sets.len()];
    loop {
        let mut prob = 1.0;
        let mut infector = vec![None; rec.n()];
        for (k, &j) in secondaries.iter().enumerate() {
            let denom: f64 = sets[k].iter().map(|&i| model.hazard(age(i, j)).unwrap()).sum();
            let i = sets[k][choice[k]];
            prob *= model.hazard(age(i, j)).unwrap() / denom;
            infector[j] = Some(i);
        }
        total += prob * brute_nelson_aalen(rec, &infector, tau);
        // odometer over the candidate sets
        let mut k = 0;
        loop {
            if k == sets.len() {
                return total;
            }
            choice[k] += 1;
            if choice[k] < sets[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

pub fn network_count(rec: &EpidemicRecord) -> usize {
    (0..rec.n())
        .filter(|&j| rec.persons[j].infection.is_some() && !rec.persons[j].imported)
        .map(|j| brute_infectious_set(rec, j).len())
        .product()
}

/// Simulated epidemic on a random directed graph with at most `max_pairs`
/// ordered pairs; infectors are recorded.
pub fn random_small_record(seed: u64, max_pairs: usize) -> EpidemicRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(2..=5);
        let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        // shuffle, then keep a random prefix
        for k in (1..pairs.len()).rev() {
            pairs.swap(k, rng.random_range(0..=k));
        }
        pairs.truncate(rng.random_range(1..=max_pairs.min(pairs.len())));
        let net = Network::from_directed_edges(n, pairs).unwrap();
        let contact = match rng.random_range(0..3) {
            0 => HazardModel::exponential(1.5).unwrap(),
            1 => HazardModel::weibull(2.0, 1.0).unwrap(),
            _ => HazardModel::weibull(0.5, 1.0).unwrap(),
        };
        let mut config = SimulationConfig::new(SimulationMode::MassAction, n, contact, n, rng.random());
        config.latent = DurationModel::Exponential { rate: 2.0 };
        config.initial_infections = rng.random_range(1..=2.min(n));
        let out = simulate_on(&config, ContactStructure::Network(net), &mut rng).unwrap();
        if out.record.secondary_infections().count() > 0 {
            return out.record;
        }
    }
}

/// Daily household record: `days[k]` is the infection day of member `k`
/// (`None` if never infected); members `0..primaries` are imported at day 0.
pub fn daily_household(days: &[Option<i64>], primaries: usize, latent: i64, infectious: i64, end: i64) -> EpidemicRecord {
    let n = days.len();
    let persons = days
        .iter()
        .enumerate()
        .map(|(k, t)| match t {
            Some(t) if k < primaries => PersonHistory::imported(Infection::new(*t as f64, latent as f64, infectious as f64)),
            Some(t) => PersonHistory::infected(Infection::new(*t as f64, latent as f64, infectious as f64)),
            None => PersonHistory::susceptible(),
        })
        .collect();
    let edges = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)));
    let net = Network::from_directed_edges(n, edges).unwrap();
    EpidemicRecord::new(persons, ContactStructure::Network(net), end as f64).unwrap()
}

/// Probability of the observed daily infection pattern by running the
/// household forward one day at a time. On each day every susceptible member
/// is infected by some nonempty subset of the currently infectious members or
/// escapes them all; the subset sum is expanded term by term.
pub fn forward_chain_probability(days: &[Option<i64>], primaries: usize, latent: i64, hazard: &DiscreteHazard, end: i64) -> f64 {
    let n = days.len();
    let d = hazard.days() as i64;
    let lambda = |age: i64| hazard.at(age).unwrap();
    let mut prob = 1.0;
    for day in 1..=end {
        for j in primaries..n {
            // j must still be susceptible at the start of the day
            if days[j].is_some_and(|t| t < day) {
                continue;
            }
            let sources: Vec<i64> = (0..n)
                .filter(|&i| i != j)
                .filter_map(|i| days[i].filter(|&t| t < day).map(|t| day - (t + latent)))
                .filter(|&age| age >= 1 && age <= d)
                .collect();
            let mut infected_today = 0.0;
            for mask in 1u32..(1 << sources.len()) {
                let mut term = 1.0;
                for (k, &age) in sources.iter().enumerate() {
                    term *= if mask & (1 << k) != 0 { lambda(age) } else { 1.0 - lambda(age) };
                }
                infected_today += term;
            }
            let escaped_today: f64 = sources.iter().map(|&age| 1.0 - lambda(age)).product();
            prob *= if days[j] == Some(day) { infected_today } else { escaped_today };
        }
    }
    prob
}
