mod common;

use common::{daily_household, forward_chain_probability};
use contact_core::chain_binomial::{chain_binomial_loglik, fit_escape_probability, DiscreteHazard};
use contact_core::fit::log_likelihood;
use contact_core::record::{ContactStructure, EpidemicRecord, Infection, Network, PersonHistory};
use contact_core::{Error, HazardModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HAZARDS: [[f64; 4]; 3] = [[0.3, 0.15, 0.45, 0.05], [0.1, 0.1, 0.1, 0.1], [0.0, 0.6, 0.2, 0.35]];

/// Every infection-day pattern of a household: members `primaries..size` are
/// each uninfected or infected on a day in `1..=horizon`.
fn patterns(size: usize, primaries: usize, horizon: i64) -> Vec<Vec<Option<i64>>> {
    let free = size - primaries;
    let choices = horizon as usize + 1;
    (0..choices.pow(free as u32))
        .map(|mut code| {
            let mut days = vec![Some(0); primaries];
            for _ in 0..free {
                let c = code % choices;
                code /= choices;
                days.push((c > 0).then_some(c as i64));
            }
            days
        })
        .collect()
}

fn completion(days: &[Option<i64>], latent: i64, d: i64) -> i64 {
    days.iter().flatten().max().unwrap() + latent + d
}

/// Probability of the pattern from the likelihood; impossible patterns give 0.
fn likelihood(days: &[Option<i64>], primaries: usize, latent: i64, hazard: &DiscreteHazard) -> f64 {
    let d = hazard.days() as i64;
    let rec = daily_household(days, primaries, latent, d, completion(days, latent, d));
    match chain_binomial_loglik(&rec, hazard) {
        Ok(ll) => ll.exp(),
        Err(Error::EmptyInfectiousSet(_)) => 0.0,
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn matches_forward_enumeration_on_small_households() {
    let mut checked = 0;
    for size in 1..=4usize {
        for primaries in 1..=2.min(size) {
            for d in 1..=4usize {
                for latent in 0..=1i64 {
                    let horizon = (size - primaries) as i64 * (latent + d as i64);
                    for table in HAZARDS {
                        let hazard = DiscreteHazard::new(table[..d].to_vec()).unwrap();
                        let mut total = 0.0;
                        for days in patterns(size, primaries, horizon) {
                            let end = completion(&days, latent, d as i64);
                            let oracle = forward_chain_probability(&days, primaries, latent, &hazard, end);
                            let got = likelihood(&days, primaries, latent, &hazard);
                            assert!(
                                (got - oracle).abs() < 1e-10,
                                "size {size} primaries {primaries} D {d} latent {latent} {days:?}: {got} vs {oracle}"
                            );
                            total += got;
                            checked += 1;
                        }
                        assert!((total - 1.0).abs() < 1e-10, "patterns sum to {total}");
                    }
                }
            }
        }
    }
    assert!(checked > 10_000);
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// With a one-day infectious period and no latency each day is a Reed-Frost
/// generation; summing labeled patterns by generation sizes must give the
/// textbook chain probability.
#[test]
fn one_day_period_reproduces_reed_frost_chains() {
    let q: f64 = 0.7;
    let hazard = DiscreteHazard::constant(1.0 - q, 1).unwrap();
    let size = 4;
    let mut by_chain = std::collections::BTreeMap::<Vec<usize>, f64>::new();
    for days in patterns(size, 1, 3) {
        let mut chain = vec![1usize];
        let mut day = 1;
        loop {
            let c = days.iter().filter(|&&t| t == Some(day)).count();
            if c == 0 {
                break;
            }
            chain.push(c);
            day += 1;
        }
        let infected_days = days.iter().flatten().count();
        if infected_days != chain.iter().sum::<usize>() {
            continue; // gap in the days, impossible
        }
        *by_chain.entry(chain).or_default() += likelihood(&days, 1, 0, &hazard);
    }
    for (chain, p) in by_chain {
        let mut susceptible = size - 1;
        let mut expected = 1.0;
        for w in chain.windows(2) {
            let (i, next) = (w[0] as i32, w[1]);
            expected *= binomial(susceptible, next) * (1.0 - q.powi(i)).powi(next as i32) * q.powi(i * (susceptible - next) as i32);
            susceptible -= next;
        }
        let last = *chain.last().unwrap() as i32;
        expected *= q.powi(last * susceptible as i32);
        assert!((p - expected).abs() < 1e-12, "chain {chain:?}: {p} vs {expected}");
    }
}

/// Four-person record on a fine grid: the daily log likelihood of the
/// discretized hazard, less `log h` per infection, approaches the continuous
/// log likelihood as `h` shrinks.
#[test]
fn daily_likelihood_converges_to_continuous_form() {
    let model = HazardModel::weibull(2.0, 1.0).unwrap();
    // base unit 0.25: infections at 0, 0.75, 1.5; latent 0.25; infectious 2
    let unit = 0.25;
    let persons = vec![
        PersonHistory::imported(Infection::new(0.0, unit, 8.0 * unit)),
        PersonHistory::infected(Infection::new(3.0 * unit, unit, 8.0 * unit)),
        PersonHistory::infected(Infection::new(6.0 * unit, unit, 8.0 * unit)),
        PersonHistory::susceptible(),
    ];
    let net = Network::from_directed_edges(4, (0..4).flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))).unwrap();
    let continuous = EpidemicRecord::new(persons, ContactStructure::Network(net), 15.0 * unit).unwrap();
    let exact = log_likelihood(&continuous.candidate_sets().unwrap(), &continuous.risk_set(), &model).unwrap();

    let mut errors = vec![];
    for k in 0..7 {
        let s = 1i64 << k;
        let h = unit / s as f64;
        let d = (8 * s) as usize;
        let lambda: Vec<f64> = (1..=d)
            .map(|a| {
                let inc = model.cumulative_hazard(a as f64 * h) - model.cumulative_hazard((a - 1) as f64 * h);
                -(-inc).exp_m1()
            })
            .collect();
        let hazard = DiscreteHazard::new(lambda).unwrap();
        let rec = daily_household(&[Some(0), Some(3 * s), Some(6 * s), None], 1, s, 8 * s, 15 * s);
        let ll = chain_binomial_loglik(&rec, &hazard).unwrap() - 2.0 * h.ln();
        errors.push((ll - exact).abs());
    }
    // first order: each halving of h roughly halves the error once the grid
    // resolves the windows
    for w in errors[1..].windows(2) {
        assert!(w[1] < 0.7 * w[0], "errors not shrinking: {errors:?}");
    }
    assert!(errors.last().unwrap() < &0.005, "{errors:?}");
}

/// Households of five with one primary, simulated day by day.
fn simulate_households(rng: &mut ChaCha8Rng, count: usize, lambda: f64, d: i64) -> Vec<EpidemicRecord> {
    (0..count)
        .map(|_| {
            let mut days = vec![Some(0i64), None, None, None, None];
            let mut day = 0;
            loop {
                day += 1;
                let sources = days.iter().flatten().filter(|&&t| (1..=d).contains(&(day - t))).count();
                if sources == 0 && days.iter().flatten().all(|&t| day - t > d) {
                    break;
                }
                let q = 1.0 - (1.0 - lambda).powi(sources as i32);
                for slot in days.iter_mut().skip(1) {
                    if slot.is_none() && rng.random::<f64>() < q {
                        *slot = Some(day);
                    }
                }
            }
            let end = completion(&days, 0, d);
            daily_household(&days, 1, 0, d, end)
        })
        .collect()
}

#[test]
fn escape_fit_is_calibrated() {
    let (lambda, d) = (0.012, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let reps = 200;
    let mut hits = 0;
    for _ in 0..reps {
        let records = simulate_households(&mut rng, 60, lambda, d);
        let fit = fit_escape_probability(&records, d as usize).unwrap();
        if fit.lambda_ci.0 <= lambda && lambda <= fit.lambda_ci.1 {
            hits += 1;
        }
    }
    assert!(hits as f64 / reps as f64 >= 0.90, "{hits}/{reps}");
}

#[test]
fn latent_day_shifts_ages() {
    // primary onset moves one day later, so the same infection day is one
    // day younger
    let h = DiscreteHazard::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let a = daily_household(&[Some(0), Some(3), None], 1, 0, 4, 10);
    let b = daily_household(&[Some(0), Some(4), None], 1, 1, 4, 11);
    let la = chain_binomial_loglik(&a, &h).unwrap();
    let lb = chain_binomial_loglik(&b, &h).unwrap();
    assert!((la - lb).abs() < 1e-14);
}
