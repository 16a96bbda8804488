use contact_core::chain_binomial::fit_escape_probability;
use contact_core::harness::household::{
    household_analyze, pool_households, reed_frost_final_size, sar_forward_simulation, sensitivity_analysis, synthetic_fixture,
    synthetic_layout, Household, HouseholdData, HouseholdLayout, HouseholdOptions, Member, NaturalHistory, FIXTURE_SEED,
};
use contact_core::io;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Final-size law of a Reed-Frost household of three with one primary.
fn size_three_law(p: f64) -> [f64; 3] {
    let q = 1.0 - p;
    let none = q * q;
    // one infected in the first generation who then fails to infect the last
    let one = 2.0 * p * q * q;
    [none, one, 1.0 - none - one]
}

#[test]
fn reed_frost_final_size_matches_exact_law() {
    let layout = HouseholdLayout { size: 3, primaries: 1 };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in [0.07, 0.3, 0.8] {
        let n = 200_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[reed_frost_final_size(layout, p, &mut rng)] += 1;
        }
        for (k, &expected) in size_three_law(p).iter().enumerate() {
            let freq = counts[k] as f64 / n as f64;
            let sd = (expected * (1.0 - expected) / n as f64).sqrt();
            assert!((freq - expected).abs() < 5.0 * sd + 1e-12, "p={p} size {k}: {freq} vs {expected}");
        }
    }
}

#[test]
fn sar_mean_matches_exact_expectation() {
    let p = 0.2;
    let law = size_three_law(p);
    let expected = (law[1] + 2.0 * law[2]) / 2.0;
    let layout = vec![HouseholdLayout { size: 3, primaries: 1 }; 50];
    let sar = sar_forward_simulation(&layout, p, 20_000, 1).unwrap();
    // sd of one replicate's SAR is about .026
    assert!((sar.mean - expected).abs() < 0.001, "{} vs {expected}", sar.mean);
    assert!(sar.lower <= sar.mean && sar.mean <= sar.upper);
    assert_eq!(sar.replicates.len(), 20_000);
    // replicates do not depend on the thread schedule
    assert_eq!(sar_forward_simulation(&layout, p, 500, 1).unwrap().replicates, sar.replicates[..500]);
}

#[test]
fn bundled_fixture_is_the_generator_output() {
    let bundled = io::read_households(io::SYNTHETIC_HOUSEHOLDS_CSV).unwrap();
    let generated = synthetic_fixture(FIXTURE_SEED);
    assert_eq!(bundled, generated);
    assert_eq!(bundled.households.len(), 58);
    assert_eq!(bundled.member_count(), 299);
    assert_eq!(bundled.primary_count(), 62);
    let layout: Vec<HouseholdLayout> = bundled.layout();
    assert_eq!(layout, synthetic_layout());
}

#[test]
fn incubation_period_cancels() {
    let data = synthetic_fixture(FIXTURE_SEED);
    let options = HouseholdOptions::default();
    let base = household_analyze(&data, &NaturalHistory::new(2, 0, 6).unwrap(), &options).unwrap();
    for incubation in [0, 1, 3, 5] {
        let other = household_analyze(&data, &NaturalHistory::new(incubation, 0, 6).unwrap(), &options).unwrap();
        assert_eq!(other.em.cumulative_hazard, base.em.cumulative_hazard);
        assert_eq!(other.contact_probability, base.contact_probability);
    }
}

#[test]
fn sensitivity_grid_runs_every_cell() {
    let data = synthetic_fixture(FIXTURE_SEED);
    let grid = NaturalHistory::sensitivity_grid();
    let cells = sensitivity_analysis(&data, &grid, &HouseholdOptions::default());
    assert_eq!(cells.len(), grid.len());
    for cell in &cells {
        let a = cell.result.as_ref().unwrap();
        assert!(a.em.converged, "{}", cell.natural_history);
        assert_eq!(a.households_used + a.problems.len(), 58);
        let p = a.contact_probability;
        assert!(0.0 <= p.lower && p.lower <= p.value && p.value <= p.upper && p.upper <= 1.0);
    }
}

fn household(id: &str, onsets: &[Option<i64>]) -> Household {
    Household { id: id.into(), members: onsets.iter().enumerate().map(|(k, &onset)| Member { id: format!("{}", k + 1), onset }).collect() }
}

#[test]
fn unexplainable_households_are_reported_and_skipped() {
    let data = HouseholdData {
        households: vec![
            household("A", &[Some(10), Some(12), None]),
            // second case 9 days later cannot be explained by a 6-day infectious period
            household("B", &[Some(3), Some(12)]),
            household("C", &[None, None]),
        ],
    };
    let pooled = pool_households(&data, &NaturalHistory::default()).unwrap();
    assert_eq!(pooled.record.n(), 3);
    let ids: Vec<&str> = pooled.problems.iter().map(|p| p.household.as_str()).collect();
    assert_eq!(ids, ["B", "C"]);
    // a longer infectious period makes B usable
    let longer = pool_households(&data, &NaturalHistory::new(2, 0, 9).unwrap()).unwrap();
    assert_eq!(longer.record.n(), 5);
}

#[test]
fn chain_binomial_and_marginal_estimates_agree_on_fixture() {
    let data = synthetic_fixture(FIXTURE_SEED);
    let nh = NaturalHistory::default();
    let analysis = household_analyze(&data, &nh, &HouseholdOptions::default()).unwrap();
    let pooled = pool_households(&data, &nh).unwrap();
    let fit = fit_escape_probability(&[pooled.record], nh.infectious as usize).unwrap();
    let p = 1.0 - (1.0 - fit.lambda).powi(nh.infectious as i32);
    assert!(analysis.contact_probability.contains(p), "{p} vs {}", analysis.contact_probability);
}
