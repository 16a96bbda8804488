use contact_core::fit::fit_parametric;
use contact_core::network::generate_ws_network;
use contact_core::simulate::{simulate_epidemic, DurationModel, SimulationConfig, SimulationMode};
use contact_core::{ContactStructure, Family, HazardModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Kolmogorov distance between the empirical distribution of `sample` and `cdf`.
fn ks_distance(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max((f - (k + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn hazard_samples_follow_their_survival_functions() {
    let models = [
        HazardModel::exponential(2.0).unwrap(),
        HazardModel::weibull(0.5, 5.0).unwrap(),
        HazardModel::weibull(2.0, 1.0).unwrap(),
        HazardModel::gamma(2.5, 1.5).unwrap(),
        HazardModel::gamma(0.6, 1.0).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 20_000;
    // 1.63 / sqrt(n) is the 1% critical value
    let critical = 1.63 / (n as f64).sqrt();
    for model in models {
        let sample: Vec<f64> = (0..n).map(|_| model.sample(&mut rng)).collect();
        let d = ks_distance(sample, |x| 1.0 - model.survival(x));
        assert!(d < critical, "{model:?}: KS distance {d}");
    }
}

#[test]
fn duration_models_have_the_right_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cases = [
        (DurationModel::Constant(2.5), 2.5),
        (DurationModel::Exponential { rate: 0.5 }, 2.0),
        (DurationModel::Gamma { shape: 3.0, rate: 2.0 }, 1.5),
        (DurationModel::Weibull { shape: 2.0, rate: 1.0 }, 0.886_226_925_452_758),
    ];
    for (model, mean) in cases {
        let n = 50_000;
        let avg = (0..n).map(|_| model.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((avg - mean).abs() < 0.02 * mean, "{model:?}: {avg}");
    }
}

#[test]
fn simulated_records_are_internally_consistent() {
    for (mode, seed) in [(SimulationMode::Network { k: 10, p: 0.1 }, 5), (SimulationMode::MassAction, 6)] {
        let mut config = SimulationConfig::new(mode, 3000, HazardModel::weibull(2.0, 1.0).unwrap(), 200, seed);
        config.latent = DurationModel::Gamma { shape: 2.0, rate: 4.0 };
        config.initial_infections = 3;
        let out = (0..).map(|k| simulate_epidemic(&config.replicate(k)).unwrap()).find(|o| !o.extinct).unwrap();
        let rec = out.record;
        rec.validate().unwrap();
        assert_eq!(rec.infection_count(), 200);
        assert_eq!(rec.persons.iter().filter(|p| p.imported).count(), 3);
        let last = rec.infected().map(|(_, inf)| inf.time).fold(0.0, f64::max);
        assert_eq!(rec.end_time, last, "observation ends at the stop_m-th infection");
        for (j, inf) in rec.secondary_infections() {
            let v = rec.infectors[j].expect("simulated infector recorded");
            assert!(rec.could_infect(v, j), "infector {v} of {j} was not infectious");
            let age = rec.contact_age(v, j).unwrap();
            assert!(age > 0.0 && age <= rec.persons[v].infection.unwrap().infectious);
            assert!(inf.time <= rec.end_time);
        }
        if let ContactStructure::Network(net) = &rec.contacts {
            assert_eq!(net.directed_edge_count(), 2 * 3000 * 5);
        }
    }
}

#[test]
fn same_seed_same_record() {
    let config = SimulationConfig::new(SimulationMode::Network { k: 6, p: 0.2 }, 2000, HazardModel::exponential(1.5).unwrap(), 100, 9);
    assert_eq!(simulate_epidemic(&config).unwrap().record, simulate_epidemic(&config).unwrap().record);
    let other = simulate_epidemic(&config.replicate(1)).unwrap().record;
    assert_ne!(simulate_epidemic(&config).unwrap().record, other);
}

#[test]
fn parametric_fit_recovers_weibull_shape_without_infectors() {
    let truth = HazardModel::weibull(2.0, 1.0).unwrap();
    let config = SimulationConfig::new(SimulationMode::Network { k: 10, p: 0.1 }, 10_000, truth, 800, 12);
    let out = (0..).map(|k| simulate_epidemic(&config.replicate(k)).unwrap()).find(|o| !o.extinct).unwrap();
    let mut rec = out.record;
    let observed = fit_parametric(&rec, Family::Weibull).unwrap();
    rec.infectors = vec![None; rec.n()];
    let latent = fit_parametric(&rec, Family::Weibull).unwrap();
    for fit in [&observed, &latent] {
        let shape = fit.model.params()[0];
        assert!((shape - 2.0).abs() < 0.2, "shape {shape}");
        assert!(!fit.boundary);
    }
    assert!(latent.std_errors.is_some());
    // fewer observed infectors leave less information about the shape
    assert!(latent.std_errors.as_ref().unwrap()[0] >= observed.std_errors.as_ref().unwrap()[0] * 0.99);
}

#[test]
fn watts_strogatz_lattice_survival_matches_binomial_rate() {
    // a node keeps its lattice when none of its k incident lattice edges moves
    for (k, p, seed) in [(10, 0.1, 1), (4, 0.3, 2), (6, 0.05, 3)] {
        let n = 50_000;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ws = generate_ws_network(n, k, p, &mut rng).unwrap();
        let expected = (1.0 - p as f64).powi(k as i32);
        let sd = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((ws.intact_fraction() - expected).abs() < 5.0 * sd, "k={k} p={p}: {}", ws.intact_fraction());
        assert_eq!(ws.edge_count(), n * k / 2);
        let mean_rewired = ws.rewired_edges as f64 / (n * k / 2) as f64;
        assert!((mean_rewired - p).abs() < 0.01);
    }
}
