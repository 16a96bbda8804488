//! Household transmission studies from daily symptom-onset data.
//!
//! Onset days are turned into infection, infectiousness and removal times
//! under an assumed natural history. Each household starts with its primary
//! cases (earliest onset) imported at time zero; households are pooled into one
//! network record whose edges join members of the same household.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::em::{em_estimate, EmConfig, EmResult};
use crate::error::{Error, Result};
use crate::fit::{fit_candidate_sets, ParametricFit};
use crate::hazard::Family;
use crate::record::{ContactStructure, EpidemicRecord, Infection, Network, PersonHistory};
use crate::stats::{sorted_quantile, Interval};

/// Assumed incubation, latent and infectious periods in whole days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NaturalHistory {
    pub incubation: i64,
    pub latent: i64,
    pub infectious: i64,
}

impl Default for NaturalHistory {
    fn default() -> Self {
        Self { incubation: 2, latent: 0, infectious: 6 }
    }
}

impl NaturalHistory {
    pub fn new(incubation: i64, latent: i64, infectious: i64) -> Result<Self> {
        let nh = Self { incubation, latent, infectious };
        nh.validate()?;
        Ok(nh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.incubation < 0 || self.latent < 0 || self.infectious < 1 {
            return Err(Error::InvalidParameter(format!(
                "natural history needs incubation >= 0, latent >= 0, infectious >= 1; got {self}"
            )));
        }
        Ok(())
    }

    /// One-at-a-time variation around the primary assumptions (incubation 1-3,
    /// latent 0-1, infectious 5-7) followed by the two joint extremes.
    pub fn sensitivity_grid() -> Vec<NaturalHistory> {
        let base = Self::default();
        let mut grid = vec![base];
        for incubation in [1, 3] {
            grid.push(Self { incubation, ..base });
        }
        grid.push(Self { latent: 1, ..base });
        for infectious in [5, 7] {
            grid.push(Self { infectious, ..base });
        }
        grid.push(Self { incubation: 1, latent: 1, infectious: 5 });
        grid.push(Self { incubation: 3, latent: 0, infectious: 7 });
        grid
    }
}

impl fmt::Display for NaturalHistory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "incubation {} latent {} infectious {}", self.incubation, self.latent, self.infectious)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub id: String,
    /// Day of symptom onset; `None` if never ill.
    pub onset: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Household {
    pub id: String,
    pub members: Vec<Member>,
}

impl Household {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn first_onset(&self) -> Option<i64> {
        self.members.iter().filter_map(|m| m.onset).min()
    }

    /// Members with the earliest onset day (primary and co-primary cases).
    pub fn primaries(&self) -> Vec<usize> {
        let Some(first) = self.first_onset() else { return vec![] };
        (0..self.size()).filter(|&k| self.members[k].onset == Some(first)).collect()
    }

    pub fn secondary_count(&self) -> usize {
        self.members.iter().filter(|m| m.onset.is_some()).count() - self.primaries().len()
    }

    /// Record of this household alone, with the first infection at time 0.
    pub fn record(&self, nh: &NaturalHistory) -> Result<EpidemicRecord> {
        let Some(first) = self.first_onset() else {
            return Err(Error::InvalidRecord(format!("household {} has no cases", self.id)));
        };
        let persons = member_histories(self, first, nh);
        let end = end_time(self, first, nh);
        let edges = complete_edges(self.size(), 0);
        let network = Network::from_directed_edges(self.size(), edges)?;
        EpidemicRecord::new(persons, ContactStructure::Network(network), end)
    }
}

fn member_histories(h: &Household, first: i64, nh: &NaturalHistory) -> Vec<PersonHistory> {
    h.members
        .iter()
        .map(|m| match m.onset {
            None => PersonHistory::susceptible(),
            Some(day) => {
                // infection = onset - incubation; the household clock starts at
                // the primary infection
                let infection = Infection::new((day - first) as f64, nh.latent as f64, nh.infectious as f64);
                if day == first {
                    PersonHistory::imported(infection)
                } else {
                    PersonHistory::infected(infection)
                }
            }
        })
        .collect()
}

fn end_time(h: &Household, first: i64, nh: &NaturalHistory) -> f64 {
    let last = h.members.iter().filter_map(|m| m.onset).max().unwrap_or(first);
    (last - first + nh.latent + nh.infectious) as f64
}

fn complete_edges(size: usize, offset: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..size).flat_map(move |i| (0..size).filter(move |&j| j != i).map(move |j| (offset + i, offset + j)))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HouseholdData {
    pub households: Vec<Household>,
}

impl HouseholdData {
    pub fn member_count(&self) -> usize {
        self.households.iter().map(Household::size).sum()
    }

    pub fn primary_count(&self) -> usize {
        self.households.iter().map(|h| h.primaries().len()).sum()
    }

    pub fn secondary_count(&self) -> usize {
        self.households.iter().filter(|h| h.first_onset().is_some()).map(Household::secondary_count).sum()
    }

    /// `(size, primaries)` of every household with at least one case.
    pub fn layout(&self) -> Vec<HouseholdLayout> {
        self.households
            .iter()
            .filter(|h| h.first_onset().is_some())
            .map(|h| HouseholdLayout { size: h.size(), primaries: h.primaries().len() })
            .collect()
    }
}

/// A household whose timings cannot be explained under the natural history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HouseholdProblem {
    pub household: String,
    pub message: String,
}

/// Households pooled into a single network record.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledHouseholds {
    pub record: EpidemicRecord,
    /// `(household index, member index)` of every person in the record.
    pub members: Vec<(usize, usize)>,
    pub problems: Vec<HouseholdProblem>,
}

/// Pools every household with at least one case. Households where some
/// secondary case has no candidate infector are left out and reported.
pub fn pool_households(data: &HouseholdData, nh: &NaturalHistory) -> Result<PooledHouseholds> {
    nh.validate()?;
    let mut persons = Vec::new();
    let mut members = Vec::new();
    let mut edges = Vec::new();
    let mut problems = Vec::new();
    let mut end: f64 = 0.0;
    for (h_idx, h) in data.households.iter().enumerate() {
        let Some(first) = h.first_onset() else {
            problems.push(HouseholdProblem { household: h.id.clone(), message: "no cases".into() });
            continue;
        };
        let own = h.record(nh)?;
        if let Err(e) = own.candidate_sets() {
            let message = match e {
                Error::EmptyInfectiousSet(k) => {
                    format!("member {} has no possible infector under {nh}", h.members[k].id)
                }
                other => other.to_string(),
            };
            problems.push(HouseholdProblem { household: h.id.clone(), message });
            continue;
        }
        edges.extend(complete_edges(h.size(), persons.len()));
        persons.extend(member_histories(h, first, nh));
        members.extend((0..h.size()).map(|k| (h_idx, k)));
        end = end.max(end_time(h, first, nh));
    }
    if persons.is_empty() {
        return Err(Error::DegenerateData("no usable households".into()));
    }
    let network = Network::from_directed_edges(persons.len(), edges)?;
    let record = EpidemicRecord::new(persons, ContactStructure::Network(network), end)?;
    Ok(PooledHouseholds { record, members, problems })
}

/// A point estimate with pointwise confidence limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

fn short(x: f64) -> String {
    let s = format!("{x:.2}");
    match s.strip_prefix("0.") {
        Some(rest) => format!(".{rest}"),
        None => s,
    }
}

/// Two decimals without the leading zero, e.g. `.07 (.05, .10)`.
impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}, {})", short(self.value), short(self.lower), short(self.upper))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdOptions {
    pub em: EmConfig,
    /// Parametric families fitted for comparison.
    pub families: Vec<Family>,
    pub alpha: f64,
}

impl Default for HouseholdOptions {
    fn default() -> Self {
        Self { em: EmConfig::default(), families: vec![Family::Exponential, Family::Weibull], alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricSummary {
    pub fit: ParametricFit,
    pub cumulative_hazard: f64,
    pub contact_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdAnalysis {
    pub natural_history: NaturalHistory,
    pub em: EmResult,
    /// Marginal Nelson-Aalen estimate at the end of the infectious period.
    pub cumulative_hazard: Estimate,
    /// Marginal Kaplan-Meier estimate at the end of the infectious period.
    pub survival: Estimate,
    /// `1 - S(D)` with limits mapped from the survival limits.
    pub contact_probability: Estimate,
    pub parametric: Vec<ParametricSummary>,
    pub problems: Vec<HouseholdProblem>,
    pub households_used: usize,
    pub secondary_cases: usize,
}

pub fn household_analyze(data: &HouseholdData, nh: &NaturalHistory, options: &HouseholdOptions) -> Result<HouseholdAnalysis> {
    let pooled = pool_households(data, nh)?;
    let record = &pooled.record;
    let em = em_estimate(record, &options.em)?;
    let d = nh.infectious as f64;

    let lambda = em.cumulative_hazard.value_at(d);
    let ci = em.cumulative_hazard.interval(d, options.alpha);
    let (lo, hi) = if ci.degenerate { (lambda, lambda) } else { (ci.lower, ci.upper) };
    let cumulative_hazard = Estimate { value: lambda, lower: lo, upper: hi };

    let s = em.survival.value_at(d);
    let Interval { lower, upper, .. } = em.survival.interval(d, options.alpha);
    let survival = Estimate { value: s, lower, upper };
    let contact_probability = Estimate { value: 1.0 - s, lower: 1.0 - upper, upper: 1.0 - lower };

    let secondary_cases = record.secondary_infections().count();
    let mut parametric = Vec::new();
    if secondary_cases > 0 {
        let sets = record.candidate_sets()?;
        let risk = record.risk_set();
        for &family in &options.families {
            let fit = fit_candidate_sets(&sets, &risk, family)?;
            let cumulative_hazard = fit.model.cumulative_hazard(d);
            parametric.push(ParametricSummary { fit, cumulative_hazard, contact_probability: 1.0 - (-cumulative_hazard).exp() });
        }
    }
    let households_used = data.households.len() - pooled.problems.len();
    Ok(HouseholdAnalysis {
        natural_history: *nh,
        em,
        cumulative_hazard,
        survival,
        contact_probability,
        parametric,
        problems: pooled.problems,
        households_used,
        secondary_cases,
    })
}

#[derive(Debug)]
pub struct SensitivityCell {
    pub natural_history: NaturalHistory,
    pub result: Result<HouseholdAnalysis>,
}

/// Runs the household analysis at every natural history in `grid`.
pub fn sensitivity_analysis(data: &HouseholdData, grid: &[NaturalHistory], options: &HouseholdOptions) -> Vec<SensitivityCell> {
    grid.par_iter()
        .map(|nh| SensitivityCell { natural_history: *nh, result: household_analyze(data, nh, options) })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HouseholdLayout {
    pub size: usize,
    pub primaries: usize,
}

/// Final number of infections among the susceptibles of one household in a
/// Reed-Frost chain: each generation, every susceptible escapes each current
/// infective independently with probability `1 - p`.
pub fn reed_frost_final_size<R: Rng + ?Sized>(layout: HouseholdLayout, p: f64, rng: &mut R) -> usize {
    let mut susceptible = layout.size.saturating_sub(layout.primaries);
    let mut infective = layout.primaries;
    let mut total = 0;
    while infective > 0 && susceptible > 0 {
        let q = 1.0 - (1.0 - p).powi(infective as i32);
        let new = Binomial::new(susceptible as u64, q).expect("probability in [0, 1]").sample(rng) as usize;
        total += new;
        susceptible -= new;
        infective = new;
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct SarSummary {
    pub mean: f64,
    /// 2.5th and 97.5th percentiles of the replicate SARs.
    pub lower: f64,
    pub upper: f64,
    pub replicates: Vec<f64>,
}

/// Pooled secondary attack rate of forward household epidemics at per-pair
/// contact probability `p`, replicated `replicates` times.
pub fn sar_forward_simulation(layout: &[HouseholdLayout], p: f64, replicates: usize, seed: u64) -> Result<SarSummary> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("contact probability {p} outside [0, 1]")));
    }
    if replicates == 0 {
        return Err(Error::InvalidParameter("SAR simulation needs at least one replicate".into()));
    }
    let contacts: usize = layout.iter().map(|h| h.size.saturating_sub(h.primaries)).sum();
    if contacts == 0 {
        return Err(Error::DegenerateData("no susceptible household contacts".into()));
    }
    let sar: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ r as u64);
            let infected: usize = layout.iter().map(|&h| reed_frost_final_size(h, p, &mut rng)).sum();
            infected as f64 / contacts as f64
        })
        .collect();
    let mean = sar.iter().sum::<f64>() / replicates as f64;
    let mut sorted = sar.clone();
    sorted.sort_by(f64::total_cmp);
    let lower = sorted_quantile(&sorted, 0.025).unwrap_or(mean);
    let upper = sorted_quantile(&sorted, 0.975).unwrap_or(mean);
    Ok(SarSummary { mean, lower, upper, replicates: sar })
}

/// Seed of the bundled synthetic fixture.
pub const FIXTURE_SEED: u64 = 20090401;

/// Contact probability used to generate the bundled fixture.
pub const FIXTURE_CONTACT_PROBABILITY: f64 = 0.07;

/// Synthetic stand-in for the surveillance households: 58 households with 299
/// members and 62 primary cases, four households having two co-primaries.
pub fn synthetic_layout() -> Vec<HouseholdLayout> {
    // (size, number of households)
    const SIZES: [(usize, usize); 9] = [(2, 5), (3, 6), (4, 12), (5, 11), (6, 11), (7, 6), (8, 4), (9, 2), (10, 1)];
    let mut layout = Vec::new();
    for (size, count) in SIZES {
        for _ in 0..count {
            layout.push(HouseholdLayout { size, primaries: 1 });
        }
    }
    // first household of sizes 4 through 7 gets a co-primary
    for size in 4..=7 {
        let h = layout.iter_mut().find(|h| h.size == size).expect("size present");
        h.primaries = 2;
    }
    layout
}

/// Daily escape probability matching a per-period contact probability `p`
/// over `days` days: `1 - (1 - lambda)^days = p`.
pub fn daily_hazard(p: f64, days: i64) -> f64 {
    1.0 - (1.0 - p).powf(1.0 / days as f64)
}

/// Simulates daily household epidemics and reports symptom onsets.
///
/// Primaries are infected on day 0; an infective with infectiousness onset on
/// day `o` may infect on days `o + 1 ..= o + D`, each day independently with
/// probability `daily` per susceptible member. Each household gets a random
/// calendar offset.
pub fn simulate_households<R: Rng + ?Sized>(
    layout: &[HouseholdLayout],
    nh: &NaturalHistory,
    daily: f64,
    rng: &mut R,
) -> Result<HouseholdData> {
    nh.validate()?;
    if !(0.0..=1.0).contains(&daily) {
        return Err(Error::InvalidParameter(format!("daily probability {daily} outside [0, 1]")));
    }
    let mut households = Vec::with_capacity(layout.len());
    for (h_idx, h) in layout.iter().enumerate() {
        if h.primaries == 0 || h.primaries > h.size {
            return Err(Error::InvalidParameter(format!("household {h_idx}: {} primaries of {}", h.primaries, h.size)));
        }
        let mut infection: Vec<Option<i64>> = (0..h.size).map(|k| (k < h.primaries).then_some(0)).collect();
        let mut day = 0;
        loop {
            day += 1;
            let ages: Vec<i64> = infection.iter().flatten().map(|&t| day - (t + nh.latent)).collect();
            if ages.iter().all(|&a| a > nh.infectious) {
                break;
            }
            let sources = ages.iter().filter(|&&a| (1..=nh.infectious).contains(&a)).count();
            let q = 1.0 - (1.0 - daily).powi(sources as i32);
            for slot in infection.iter_mut() {
                if slot.is_none() && sources > 0 && rng.random::<f64>() < q {
                    *slot = Some(day);
                }
            }
        }
        let offset = rng.random_range(0..60);
        let members = infection
            .iter()
            .enumerate()
            .map(|(k, t)| Member { id: format!("{}", k + 1), onset: t.map(|t| t + nh.incubation + offset) })
            .collect();
        households.push(Household { id: format!("H{:02}", h_idx + 1), members });
    }
    Ok(HouseholdData { households })
}

/// The bundled synthetic fixture: `synthetic_layout` simulated at contact
/// probability .07 under the primary natural history.
pub fn synthetic_fixture(seed: u64) -> HouseholdData {
    let nh = NaturalHistory::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_households(&synthetic_layout(), &nh, daily_hazard(FIXTURE_CONTACT_PROBABILITY, nh.infectious), &mut rng)
        .expect("valid fixture parameters")
}
