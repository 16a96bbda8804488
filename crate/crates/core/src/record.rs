//! Epidemic records: who was infected when, who could contact whom, and the
//! quantities every estimator derives from them (infectious sets and risk sets).
//!
//! Times are `f64` in arbitrary units. A person who is never infected (or not
//! infected by the end of observation) carries `infection: None`; there is no
//! sentinel value for infinity.

use crate::error::{Error, Result};

/// Natural history of one infected person.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Infection {
    /// Time of infection (S to E).
    pub time: f64,
    /// Latent period; infectiousness starts at `time + latent`.
    pub latent: f64,
    /// Infectious period; removal happens at `time + latent + infectious`.
    pub infectious: f64,
}

impl Infection {
    pub fn new(time: f64, latent: f64, infectious: f64) -> Self {
        Self { time, latent, infectious }
    }

    #[inline]
    pub fn onset(&self) -> f64 {
        self.time + self.latent
    }

    #[inline]
    pub fn recovery_period(&self) -> f64 {
        self.latent + self.infectious
    }

    #[inline]
    pub fn removal(&self) -> f64 {
        self.time + self.recovery_period()
    }

    /// Whether this person is infectious at absolute time `t`; the window
    /// `(onset, removal]` is open on the left.
    #[inline]
    pub fn is_infectious_at(&self, t: f64) -> bool {
        self.onset() < t && t <= self.removal()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonHistory {
    pub infection: Option<Infection>,
    /// Infected from outside the population.
    pub imported: bool,
}

impl PersonHistory {
    pub fn susceptible() -> Self {
        Self { infection: None, imported: false }
    }

    pub fn infected(infection: Infection) -> Self {
        Self { infection: Some(infection), imported: false }
    }

    pub fn imported(infection: Infection) -> Self {
        Self { infection: Some(infection), imported: true }
    }

    #[inline]
    pub fn infection_time(&self) -> Option<f64> {
        self.infection.map(|inf| inf.time)
    }
}

/// Directed contact network stored as sorted, deduplicated adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
}

impl Network {
    /// Builds a network from directed pairs `(i, j)` meaning infectious contact
    /// from `i` to `j` is possible.
    pub fn from_directed_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidRecord(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::InvalidRecord(format!("self-edge at {i}")));
            }
            out[i].push(j);
            inc[j].push(i);
        }
        for list in out.iter_mut().chain(inc.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { out, inc })
    }

    /// Builds a symmetric network from undirected pairs.
    pub fn from_undirected_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::from_directed_edges(n, edges.into_iter().flat_map(|(i, j)| [(i, j), (j, i)]))
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out[i]
    }

    pub fn in_neighbors(&self, j: usize) -> &[usize] {
        &self.inc[j]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.out[i].binary_search(&j).is_ok()
    }

    pub fn directed_edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out.iter().enumerate().flat_map(|(i, js)| js.iter().map(move |&j| (i, j)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContactStructure {
    Network(Network),
    /// Every ordered pair may make contact.
    MassAction { n: usize },
}

impl ContactStructure {
    pub fn population(&self) -> usize {
        match self {
            ContactStructure::Network(net) => net.len(),
            ContactStructure::MassAction { n } => *n,
        }
    }

    pub fn is_mass_action(&self) -> bool {
        matches!(self, ContactStructure::MassAction { .. })
    }

    pub fn can_contact(&self, i: usize, j: usize) -> bool {
        match self {
            ContactStructure::Network(net) => net.has_edge(i, j),
            ContactStructure::MassAction { .. } => i != j,
        }
    }
}

/// Observed data from one epidemic, observed on `[0, end_time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicRecord {
    pub persons: Vec<PersonHistory>,
    pub contacts: ContactStructure,
    pub end_time: f64,
    /// Recorded infector `v_j` per person; `None` when unknown or not applicable.
    pub infectors: Vec<Option<usize>>,
}

impl EpidemicRecord {
    pub fn new(persons: Vec<PersonHistory>, contacts: ContactStructure, end_time: f64) -> Result<Self> {
        let n = persons.len();
        let record = Self { persons, contacts, end_time, infectors: vec![None; n] };
        record.validate()?;
        Ok(record)
    }

    pub fn with_infectors(mut self, infectors: Vec<Option<usize>>) -> Result<Self> {
        if infectors.len() != self.persons.len() {
            return Err(Error::InvalidRecord("infector vector length mismatch".into()));
        }
        self.infectors = infectors;
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.persons.len()
    }

    /// Number of observed infections `m`.
    pub fn infection_count(&self) -> usize {
        self.persons.iter().filter(|p| p.infection.is_some()).count()
    }

    pub fn infected(&self) -> impl Iterator<Item = (usize, &Infection)> + '_ {
        self.persons.iter().enumerate().filter_map(|(i, p)| p.infection.as_ref().map(|inf| (i, inf)))
    }

    /// Infected persons whose infection has a source inside the population.
    pub fn secondary_infections(&self) -> impl Iterator<Item = (usize, &Infection)> + '_ {
        self.persons
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.imported)
            .filter_map(|(i, p)| p.infection.as_ref().map(|inf| (i, inf)))
    }

    /// True when every secondary infection has a recorded infector.
    pub fn has_full_transmission(&self) -> bool {
        self.secondary_infections().all(|(j, _)| self.infectors[j].is_some())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.contacts.population() != n {
            return Err(Error::InvalidRecord(format!(
                "contact structure covers {} persons, record has {n}",
                self.contacts.population()
            )));
        }
        if !self.end_time.is_finite() || self.end_time < 0.0 {
            return Err(Error::InvalidRecord(format!("invalid end time {}", self.end_time)));
        }
        if self.infectors.len() != n {
            return Err(Error::InvalidRecord("infector vector length mismatch".into()));
        }
        for (i, person) in self.persons.iter().enumerate() {
            match person.infection {
                None if person.imported => {
                    return Err(Error::InvalidRecord(format!("person {i} is imported but never infected")));
                }
                None => {}
                Some(inf) => {
                    if !inf.time.is_finite() || inf.time < 0.0 || inf.time > self.end_time {
                        return Err(Error::InvalidRecord(format!(
                            "person {i} infected at {} outside [0, {}]",
                            inf.time, self.end_time
                        )));
                    }
                    if !(inf.latent >= 0.0) || !inf.latent.is_finite() {
                        return Err(Error::InvalidRecord(format!("person {i} has latent period {}", inf.latent)));
                    }
                    if !(inf.infectious > 0.0) || !inf.infectious.is_finite() {
                        return Err(Error::InvalidRecord(format!(
                            "person {i} has infectious period {}",
                            inf.infectious
                        )));
                    }
                    if person.imported && inf.time != 0.0 {
                        return Err(Error::InvalidRecord(format!("imported person {i} infected at {} != 0", inf.time)));
                    }
                }
            }
        }
        for (j, v) in self.infectors.iter().enumerate() {
            let Some(v) = *v else { continue };
            if v >= n {
                return Err(Error::InvalidRecord(format!("infector {v} of {j} out of range")));
            }
            let person = &self.persons[j];
            if person.imported || person.infection.is_none() {
                return Err(Error::InvalidRecord(format!("person {j} has an infector but no secondary infection")));
            }
            if !self.could_infect(v, j) {
                return Err(Error::InvalidInfector { infectee: j, infector: v });
            }
        }
        Ok(())
    }

    /// Whether `i` was infectious and in contact with `j` at `j`'s infection time.
    pub fn could_infect(&self, i: usize, j: usize) -> bool {
        if i == j || !self.contacts.can_contact(i, j) {
            return false;
        }
        match (self.persons[i].infection, self.persons[j].infection) {
            (Some(src), Some(dst)) => src.is_infectious_at(dst.time),
            _ => false,
        }
    }

    /// The infectious set: every `i` with `C_ij = 1` that was infectious at `t_j`.
    pub fn infectious_set(&self, j: usize) -> Result<Vec<usize>> {
        let person = &self.persons[j];
        let inf = person.infection.ok_or(Error::NotInfected(j))?;
        if person.imported {
            return Err(Error::ImportedNoInfectiousSet(j));
        }
        let t = inf.time;
        let infectious = |i: &usize| {
            self.persons[*i].infection.is_some_and(|src| src.is_infectious_at(t))
        };
        let set: Vec<usize> = match &self.contacts {
            ContactStructure::Network(net) => net.in_neighbors(j).iter().copied().filter(infectious).collect(),
            ContactStructure::MassAction { .. } => {
                self.infected().map(|(i, _)| i).filter(|i| *i != j).filter(infectious).collect()
            }
        };
        if set.is_empty() {
            return Err(Error::EmptyInfectiousSet(j));
        }
        Ok(set)
    }

    /// Infectiousness age of `i` when `j` was infected: `t_j - t_i - eps_i`.
    pub fn contact_age(&self, i: usize, j: usize) -> Option<f64> {
        let src = self.persons[i].infection?;
        let dst = self.persons[j].infection?;
        Some(dst.time - src.onset())
    }

    /// Observation cap for infector `i`: `min(iota_i, T - t_i - eps_i)`, or `None`
    /// when `i` never became infectious before `T`.
    pub fn observed_infectious_window(&self, i: usize) -> Option<f64> {
        let inf = self.persons[i].infection?;
        let onset = inf.onset();
        if onset > self.end_time {
            return None;
        }
        Some(inf.infectious.min(self.end_time - onset))
    }

    /// Candidate infectors of every secondary infection with their contact ages.
    /// A recorded infector collapses the set to that single person.
    pub fn candidate_sets(&self) -> Result<Vec<CandidateSet>> {
        self.secondary_infections()
            .map(|(j, _)| {
                let infectors = match self.infectors[j] {
                    Some(v) => vec![v],
                    None => self.infectious_set(j)?,
                };
                let candidates = infectors
                    .into_iter()
                    .map(|i| Candidate { infector: i, age: self.contact_age(i, j).expect("infected pair") })
                    .collect();
                Ok(CandidateSet { infectee: j, candidates })
            })
            .collect()
    }

    /// The number of contact intervals of length at least `tau` under observation.
    pub fn risk_set(&self) -> RiskSet {
        let mut windows: Vec<(f64, u64)> = Vec::new();
        let infected: Vec<(usize, Infection)> = self.infected().map(|(i, inf)| (i, *inf)).collect();
        for &(i, src) in &infected {
            let Some(cap) = self.observed_infectious_window(i) else { continue };
            if cap <= 0.0 {
                continue;
            }
            let onset = src.onset();
            let window_to = |j: usize| -> Option<f64> {
                let w = match self.persons[j].infection {
                    Some(dst) => cap.min(dst.time - onset),
                    None => cap,
                };
                (w > 0.0).then_some(w)
            };
            match &self.contacts {
                ContactStructure::Network(net) => {
                    for &j in net.out_neighbors(i) {
                        if let Some(w) = window_to(j) {
                            windows.push((w, 1));
                        }
                    }
                }
                ContactStructure::MassAction { n } => {
                    let uninfected = (*n - infected.len()) as u64;
                    if uninfected > 0 {
                        windows.push((cap, uninfected));
                    }
                    for &(j, _) in &infected {
                        if j != i {
                            if let Some(w) = window_to(j) {
                                windows.push((w, 1));
                            }
                        }
                    }
                }
            }
        }
        RiskSet::from_windows(windows)
    }

    /// Mass-action approximation `Y_*`: infected persons still infectious and
    /// under observation at each infectiousness age.
    pub fn mass_action_risk_set(&self) -> Result<RiskSet> {
        if !self.contacts.is_mass_action() {
            return Err(Error::WrongMode { expected: "mass-action" });
        }
        let windows = (0..self.n())
            .filter_map(|i| self.observed_infectious_window(i))
            .filter(|&cap| cap > 0.0)
            .map(|cap| (cap, 1))
            .collect();
        Ok(RiskSet::from_windows(windows))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub infector: usize,
    /// Infectiousness age of `infector` at the infection time.
    pub age: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub infectee: usize,
    pub candidates: Vec<Candidate>,
}

/// A left-continuous, nonincreasing integer step function built from a multiset of
/// observation windows `(0, c]`: `Y(tau) = #{c >= tau}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RiskSet {
    ends: Vec<f64>,
    multiplicity: Vec<u64>,
    /// `at_least[k]` = number of windows with end `>= ends[k]`.
    at_least: Vec<u64>,
}

impl RiskSet {
    pub fn from_windows(mut windows: Vec<(f64, u64)>) -> Self {
        windows.retain(|&(_, m)| m > 0);
        windows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut ends: Vec<f64> = Vec::with_capacity(windows.len());
        let mut multiplicity: Vec<u64> = Vec::with_capacity(windows.len());
        for (end, m) in windows {
            match ends.last() {
                Some(&last) if last == end => *multiplicity.last_mut().unwrap() += m,
                _ => {
                    ends.push(end);
                    multiplicity.push(m);
                }
            }
        }
        let mut at_least = vec![0; ends.len()];
        let mut acc = 0;
        for k in (0..ends.len()).rev() {
            acc += multiplicity[k];
            at_least[k] = acc;
        }
        Self { ends, multiplicity, at_least }
    }

    /// `Y(tau)` for `tau > 0`; ages `<= 0` return the total window count.
    pub fn at(&self, tau: f64) -> u64 {
        let idx = self.ends.partition_point(|&e| e < tau);
        self.at_least.get(idx).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.at_least.first().copied().unwrap_or(0)
    }

    /// Largest age with `Y > 0` (0 when empty).
    pub fn horizon(&self) -> f64 {
        self.ends.last().copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    /// Distinct window ends with their multiplicities, ascending.
    pub fn windows(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.ends.iter().copied().zip(self.multiplicity.iter().copied())
    }

    /// Points where `Y` drops, i.e. the jump points of the step function.
    pub fn jump_points(&self) -> &[f64] {
        &self.ends
    }

    /// Inverse empirical CDF of the window lengths (the possible contact
    /// intervals): the smallest end `c` with `#{ends <= c} >= p * total`.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        if self.ends.is_empty() {
            return None;
        }
        let total = self.total() as f64;
        let target = (p.clamp(0.0, 1.0) * total).max(f64::MIN_POSITIVE);
        let mut acc = 0.0;
        for (end, m) in self.windows() {
            acc += m as f64;
            // tolerate rounding in p * total
            if acc >= target * (1.0 - 1e-12) {
                return Some(end);
            }
        }
        self.ends.last().copied()
    }
}
