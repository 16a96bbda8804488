//! Event-driven stochastic SEIR epidemics on a network or under mass action.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::hazard::HazardModel;
use crate::network::generate_ws_network;
use crate::record::{ContactStructure, EpidemicRecord, Infection, PersonHistory};

/// Distribution of a latent or infectious period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DurationModel {
    Constant(f64),
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Weibull { shape: f64, rate: f64 },
}

impl DurationModel {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DurationModel::Constant(c) => c,
            DurationModel::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            DurationModel::Gamma { shape, rate } => rand_distr::Gamma::new(shape, 1.0 / rate)
                .expect("validated gamma duration")
                .sample(rng),
            DurationModel::Weibull { shape, rate } => {
                let e: f64 = Exp1.sample(rng);
                e.powf(1.0 / shape) / rate
            }
        }
    }

    fn validate(&self, name: &str, allow_zero: bool) -> Result<()> {
        let ok = match *self {
            DurationModel::Constant(c) => c.is_finite() && (c > 0.0 || (allow_zero && c == 0.0)),
            DurationModel::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            DurationModel::Gamma { shape, rate } | DurationModel::Weibull { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid {name} distribution {self:?}")))
        }
    }
}

impl fmt::Display for DurationModel {
    /// `constant,c`, `exponential,rate`, `gamma,shape,rate` or `weibull,shape,rate`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DurationModel::Constant(c) => write!(f, "constant,{c}"),
            DurationModel::Exponential { rate } => write!(f, "exponential,{rate}"),
            DurationModel::Gamma { shape, rate } => write!(f, "gamma,{shape},{rate}"),
            DurationModel::Weibull { shape, rate } => write!(f, "weibull,{shape},{rate}"),
        }
    }
}

impl FromStr for DurationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fields: Vec<&str> = s.split(',').map(str::trim).collect();
        let num = |k: usize| -> Result<f64> {
            let raw = fields.get(k).ok_or_else(|| Error::InvalidParameter(format!("duration {s:?} lacks parameter {k}")))?;
            raw.parse().map_err(|e| Error::InvalidParameter(format!("duration parameter {raw:?}: {e}")))
        };
        let (model, arity) = match fields[0].to_ascii_lowercase().as_str() {
            "constant" => (DurationModel::Constant(num(1)?), 2),
            "exponential" | "exp" => (DurationModel::Exponential { rate: num(1)? }, 2),
            "gamma" => (DurationModel::Gamma { shape: num(1)?, rate: num(2)? }, 3),
            "weibull" => (DurationModel::Weibull { shape: num(1)?, rate: num(2)? }, 3),
            other => return Err(Error::InvalidParameter(format!("unknown duration family {other:?}"))),
        };
        if fields.len() != arity {
            return Err(Error::InvalidParameter(format!("duration {s:?} needs {} parameters", arity - 1)));
        }
        model.validate("duration", true)?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimulationMode {
    /// Watts-Strogatz network with `k` neighbours in total and rewiring probability `p`.
    Network { k: usize, p: f64 },
    /// Every pair may make contact; the contact model is the normalized
    /// cumulative hazard `Lambda_*`, so each pair has `Lambda_* / (n - 1)`.
    MassAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub mode: SimulationMode,
    pub n: usize,
    pub contact: HazardModel,
    pub latent: DurationModel,
    pub infectious: DurationModel,
    pub initial_infections: usize,
    /// Observation stops at the time of this many infections (imports included).
    pub stop_m: usize,
    pub seed: u64,
}

impl SimulationConfig {
    /// Zero latent period, exponential(1) infectious period, one import.
    pub fn new(mode: SimulationMode, n: usize, contact: HazardModel, stop_m: usize, seed: u64) -> Self {
        Self {
            mode,
            n,
            contact,
            latent: DurationModel::Constant(0.0),
            infectious: DurationModel::Exponential { rate: 1.0 },
            initial_infections: 1,
            stop_m,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("population size {} < 2", self.n)));
        }
        if self.stop_m > self.n || self.stop_m == 0 {
            return Err(Error::InvalidParameter(format!("stop_m {} must lie in 1..={}", self.stop_m, self.n)));
        }
        if self.initial_infections == 0 || self.initial_infections > self.n {
            return Err(Error::InvalidParameter(format!("initial infections {}", self.initial_infections)));
        }
        if matches!(self.contact, HazardModel::Smoothed(_)) {
            return Err(Error::InvalidParameter("simulation needs a parametric contact model".into()));
        }
        self.latent.validate("latent", true)?;
        self.infectious.validate("infectious", false)
    }

    /// The same configuration with the seed of replicate `index`.
    pub fn replicate(&self, index: u64) -> Self {
        Self { seed: self.seed ^ index, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutcome {
    pub record: EpidemicRecord,
    /// Set when the epidemic died out before `stop_m` infections; `T` is then
    /// the last removal time.
    pub extinct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Onset { person: usize },
    Contact { from: usize, to: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    kind: EventKind,
}

impl Event {
    fn key(&self) -> (u8, usize, usize) {
        match self.kind {
            EventKind::Onset { person } => (0, person, 0),
            EventKind::Contact { from, to } => (1, from, to),
        }
    }
}

impl Eq for Event {}

impl Ord for Event {
    // reversed so the max-heap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.key().cmp(&self.key()))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn simulate_epidemic(config: &SimulationConfig) -> Result<SimulationOutcome> {
    config.validate()?;
    if let SimulationMode::Network { k, p } = config.mode {
        if k % 2 != 0 || k < 2 || k >= config.n || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("network k={k} p={p} for n={}", config.n)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let contacts = match config.mode {
        SimulationMode::Network { k, p } => ContactStructure::Network(generate_ws_network(config.n, k, p, &mut rng)?.network),
        SimulationMode::MassAction => ContactStructure::MassAction { n: config.n },
    };
    simulate_on(config, contacts, &mut rng)
}

/// Runs the epidemic on a given contact structure; `config.mode` is ignored.
pub fn simulate_on<R: Rng + ?Sized>(config: &SimulationConfig, contacts: ContactStructure, rng: &mut R) -> Result<SimulationOutcome> {
    config.validate()?;
    let n = config.n;
    if contacts.population() != n {
        return Err(Error::InvalidParameter("contact structure size differs from n".into()));
    }
    let mut infections: Vec<Option<Infection>> = vec![None; n];
    let mut infectors: Vec<Option<usize>> = vec![None; n];
    let mut imported = vec![false; n];
    let mut queue = BinaryHeap::new();
    let mut count = 0;

    let mut seeds: Vec<usize> = sample(rng, n, config.initial_infections).into_vec();
    seeds.sort_unstable();
    for &i in &seeds {
        let inf = Infection::new(0.0, config.latent.sample(rng), config.infectious.sample(rng));
        infections[i] = Some(inf);
        imported[i] = true;
        queue.push(Event { time: inf.onset(), kind: EventKind::Onset { person: i } });
        count += 1;
    }

    let mut end_time = if count >= config.stop_m { Some(0.0) } else { None };
    while end_time.is_none() {
        let Some(event) = queue.pop() else { break };
        match event.kind {
            EventKind::Onset { person } => {
                let inf = infections[person].expect("onset of an infected person");
                schedule_contacts(config, &contacts, person, &inf, &infections, &mut queue, rng);
            }
            EventKind::Contact { from, to } => {
                if infections[to].is_some() {
                    continue;
                }
                let inf = Infection::new(event.time, config.latent.sample(rng), config.infectious.sample(rng));
                infections[to] = Some(inf);
                infectors[to] = Some(from);
                queue.push(Event { time: inf.onset(), kind: EventKind::Onset { person: to } });
                count += 1;
                if count >= config.stop_m {
                    end_time = Some(event.time);
                }
            }
        }
    }
    let extinct = end_time.is_none();
    let end_time = end_time.unwrap_or_else(|| infections.iter().flatten().map(|inf| inf.removal()).fold(0.0, f64::max));
    let persons = infections
        .iter()
        .zip(&imported)
        .map(|(inf, &imp)| match (inf, imp) {
            (Some(inf), true) => PersonHistory::imported(*inf),
            (Some(inf), false) => PersonHistory::infected(*inf),
            (None, _) => PersonHistory::susceptible(),
        })
        .collect();
    let record = EpidemicRecord::new(persons, contacts, end_time)?.with_infectors(infectors)?;
    Ok(SimulationOutcome { record, extinct })
}

/// Contact time strictly after onset even when `tau` is lost to rounding.
fn contact_time(onset: f64, tau: f64) -> f64 {
    let t = onset + tau;
    if t > onset { t } else { f64::from_bits(onset.to_bits() + 1) }
}

fn schedule_contacts<R: Rng + ?Sized>(
    config: &SimulationConfig,
    contacts: &ContactStructure,
    i: usize,
    inf: &Infection,
    infections: &[Option<Infection>],
    queue: &mut BinaryHeap<Event>,
    rng: &mut R,
) {
    let onset = inf.onset();
    match contacts {
        ContactStructure::Network(net) => {
            for &j in net.out_neighbors(i) {
                if infections[j].is_some() {
                    continue;
                }
                let tau = config.contact.sample(rng);
                if tau <= inf.infectious {
                    queue.push(Event { time: contact_time(onset, tau), kind: EventKind::Contact { from: i, to: j } });
                }
            }
        }
        ContactStructure::MassAction { n } => {
            // successive order statistics of the n - 1 pairwise contact
            // intervals, each with cumulative hazard Lambda_* / (n - 1)
            let others = n - 1;
            let mut contacted: HashSet<usize> = HashSet::new();
            let mut level = 0.0;
            for k in 0..others {
                let e: f64 = Exp1.sample(rng);
                level += e * others as f64 / (others - k) as f64;
                let tau = config.contact.inverse_cumulative_hazard(level);
                if !(tau <= inf.infectious) {
                    break;
                }
                let j = loop {
                    let j = rng.random_range(0..*n);
                    if j != i && !contacted.contains(&j) {
                        break j;
                    }
                };
                contacted.insert(j);
                if infections[j].is_none() {
                    queue.push(Event { time: contact_time(onset, tau), kind: EventKind::Contact { from: i, to: j } });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::Network;

    #[test]
    fn zero_hazard_goes_extinct() {
        let mut cfg = SimulationConfig::new(SimulationMode::Network { k: 4, p: 0.1 }, 50, HazardModel::exponential(0.0).unwrap(), 10, 3);
        cfg.initial_infections = 2;
        let out = simulate_epidemic(&cfg).unwrap();
        assert!(out.extinct);
        assert_eq!(out.record.infection_count(), 2);
        let cfg = SimulationConfig { mode: SimulationMode::MassAction, ..cfg };
        assert!(simulate_epidemic(&cfg).unwrap().extinct);
    }

    #[test]
    fn recorded_infectors_are_consistent() {
        for (mode, seed) in [(SimulationMode::Network { k: 6, p: 0.2 }, 5), (SimulationMode::MassAction, 6)] {
            let cfg = SimulationConfig::new(mode, 400, HazardModel::weibull(2.0, 1.0).unwrap(), 80, seed);
            let out = simulate_epidemic(&cfg).unwrap();
            let rec = &out.record;
            for (j, _) in rec.secondary_infections() {
                let v = rec.infectors[j].unwrap();
                assert!(rec.infectious_set(j).unwrap().contains(&v));
                let age = rec.contact_age(v, j).unwrap();
                assert!(age > 0.0 && age <= rec.persons[v].infection.unwrap().infectious);
            }
            if !out.extinct {
                assert_eq!(rec.infection_count(), 80);
                let last = rec.infected().map(|(_, inf)| inf.time).fold(0.0, f64::max);
                assert_eq!(last, rec.end_time);
            }
        }
    }

    #[test]
    fn fixed_seed_replays() {
        let cfg = SimulationConfig::new(SimulationMode::Network { k: 10, p: 0.1 }, 1000, HazardModel::weibull(0.5, 1.0).unwrap(), 100, 42);
        assert_eq!(simulate_epidemic(&cfg).unwrap(), simulate_epidemic(&cfg).unwrap());
        assert_ne!(simulate_epidemic(&cfg).unwrap(), simulate_epidemic(&cfg.replicate(1)).unwrap());
    }

    #[test]
    fn two_person_first_passage_is_exponential() {
        // infectious period effectively unbounded: t_2 ~ Exp(rate)
        let rate = 1.7;
        let mut cfg = SimulationConfig::new(SimulationMode::MassAction, 2, HazardModel::exponential(rate).unwrap(), 2, 0);
        cfg.infectious = DurationModel::Constant(1e9);
        let reps = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut sum, mut beyond) = (0.0, 0usize);
        for _ in 0..reps {
            let net = ContactStructure::Network(Network::from_undirected_edges(2, [(0, 1)]).unwrap());
            let out = simulate_on(&cfg, net, &mut rng).unwrap();
            let imported = if out.record.persons[0].imported { 0 } else { 1 };
            let t = out.record.persons[1 - imported].infection.unwrap().time;
            sum += t;
            beyond += (t > 1.0) as usize;
        }
        let mean = sum / reps as f64;
        let se = (1.0 / rate) / (reps as f64).sqrt();
        assert!((mean - 1.0 / rate).abs() < 4.0 * se, "{mean}");
        let p = (-rate).exp();
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((beyond as f64 / reps as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn mass_action_contacts_follow_normalized_hazard() {
        // with no susceptible depletion (huge n), the number of contacts made
        // by one infective with period 1 is Poisson(Lambda_*(1) (n-1)/(n-1))
        let mut cfg = SimulationConfig::new(SimulationMode::MassAction, 100_000, HazardModel::weibull(2.0, 1.5).unwrap(), 100_000, 9);
        cfg.infectious = DurationModel::Constant(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inf = Infection::new(0.0, 0.0, 1.0);
        let infections = vec![None; cfg.n];
        let reps = 4000;
        let mut total = 0usize;
        for _ in 0..reps {
            let mut queue = BinaryHeap::new();
            schedule_contacts(&cfg, &ContactStructure::MassAction { n: cfg.n }, 0, &inf, &infections, &mut queue, &mut rng);
            total += queue.len();
        }
        let mean = total as f64 / reps as f64;
        let expected = 2.25;
        assert!((mean - expected).abs() < 4.0 * (expected / reps as f64).sqrt(), "{mean}");
    }
}
