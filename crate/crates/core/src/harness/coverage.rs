//! Monte Carlo coverage of pointwise confidence limits.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::em::{em_estimate, em_estimate_mass_action, EmConfig};
use crate::error::{Error, Result};
use crate::hazard::HazardModel;
use crate::nelson_aalen::{kaplan_meier, kaplan_meier_mass_action, nelson_aalen, nelson_aalen_mass_action};
use crate::record::EpidemicRecord;
use crate::simulate::{simulate_epidemic, SimulationConfig, SimulationMode};
use crate::stats::clopper_pearson;
use crate::step::StepEstimate;

pub const DEFAULT_QUANTILES: [f64; 7] = [0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    NelsonAalen,
    KaplanMeier,
    MarginalNelsonAalen,
    MarginalKaplanMeier,
}

impl Estimator {
    pub const ALL: [Estimator; 4] =
        [Estimator::NelsonAalen, Estimator::KaplanMeier, Estimator::MarginalNelsonAalen, Estimator::MarginalKaplanMeier];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::NelsonAalen => "nelson-aalen",
            Estimator::KaplanMeier => "kaplan-meier",
            Estimator::MarginalNelsonAalen => "marginal-na",
            Estimator::MarginalKaplanMeier => "marginal-km",
        }
    }

    fn is_marginal(self) -> bool {
        matches!(self, Estimator::MarginalNelsonAalen | Estimator::MarginalKaplanMeier)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown estimator {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageConfig {
    pub simulation: SimulationConfig,
    pub replicates: usize,
    pub estimators: Vec<Estimator>,
    pub quantiles: Vec<f64>,
    pub em: EmConfig,
    pub alpha: f64,
    /// Simulations that die out before `stop_m` are redrawn at most this many
    /// times per replicate.
    pub max_redraws: usize,
}

impl CoverageConfig {
    pub fn new(simulation: SimulationConfig, replicates: usize) -> Self {
        let em = match simulation.mode {
            SimulationMode::MassAction => EmConfig::mass_action(),
            SimulationMode::Network { .. } => EmConfig::default(),
        };
        Self {
            simulation,
            replicates,
            estimators: Estimator::ALL.to_vec(),
            quantiles: DEFAULT_QUANTILES.to_vec(),
            em,
            alpha: 0.05,
            max_redraws: 1000,
        }
    }
}

/// Study size: desk scale is the default, paper scale matches the published
/// runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

impl Scale {
    /// `(n, stop_m, replicates)`.
    pub fn dimensions(self) -> (usize, usize, usize) {
        match self {
            Scale::Desk => (10_000, 300, 200),
            Scale::Paper => (100_000, 1_000, 1_000),
        }
    }
}

/// The six simulation cells: three contact-interval families on a
/// Watts-Strogatz network (k = 10, p = .1) and three normalized families under
/// mass action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    NetworkWeibullHalf,
    NetworkExponential,
    NetworkWeibullTwo,
    MassActionWeibullHalf,
    MassActionExponential,
    MassActionWeibullTwo,
}

pub const DEFAULT_SEED: u64 = 2024;

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::NetworkWeibullHalf,
        Preset::NetworkExponential,
        Preset::NetworkWeibullTwo,
        Preset::MassActionWeibullHalf,
        Preset::MassActionExponential,
        Preset::MassActionWeibullTwo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::NetworkWeibullHalf => "table1-w05",
            Preset::NetworkExponential => "table1-exp",
            Preset::NetworkWeibullTwo => "table1-w2",
            Preset::MassActionWeibullHalf => "table2-w05",
            Preset::MassActionExponential => "table2-exp",
            Preset::MassActionWeibullTwo => "table2-w2",
        }
    }

    pub fn mode(self) -> SimulationMode {
        match self {
            Preset::NetworkWeibullHalf | Preset::NetworkExponential | Preset::NetworkWeibullTwo => {
                SimulationMode::Network { k: 10, p: 0.1 }
            }
            _ => SimulationMode::MassAction,
        }
    }

    pub fn contact(self) -> HazardModel {
        let model = match self {
            Preset::NetworkWeibullHalf => HazardModel::weibull(0.5, 1.0),
            Preset::NetworkExponential => HazardModel::exponential(1.0),
            Preset::NetworkWeibullTwo | Preset::MassActionWeibullTwo => HazardModel::weibull(2.0, 1.0),
            Preset::MassActionWeibullHalf => HazardModel::weibull(0.5, 5.0),
            Preset::MassActionExponential => HazardModel::exponential(2.0),
        };
        model.expect("valid preset parameters")
    }

    pub fn config(self, scale: Scale, seed: u64) -> CoverageConfig {
        let (n, stop_m, replicates) = scale.dimensions();
        CoverageConfig::new(SimulationConfig::new(self.mode(), n, self.contact(), stop_m, seed), replicates)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown preset {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub estimator: Estimator,
    pub quantile: f64,
    pub hits: u64,
    pub n: u64,
    pub coverage: f64,
    /// Exact 95% interval for the coverage probability.
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub estimator: Estimator,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub replicates: usize,
    /// Estimator failures, excluded from the affected rows.
    pub failures: Vec<ReplicateFailure>,
    /// EM iteration counts of the replicates that ran the marginal estimators.
    pub em_iterations: Vec<usize>,
    pub em_nonconverged: usize,
    /// Simulations discarded because they died out before `stop_m`.
    pub extinct_redraws: usize,
    /// Replicates with no epidemic reaching `stop_m` after all redraws.
    pub abandoned: usize,
}

impl CoverageReport {
    pub fn row(&self, estimator: Estimator, quantile: f64) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.estimator == estimator && (r.quantile - quantile).abs() < 1e-12)
    }

    /// Share of EM runs that stopped within `limit` iterations.
    pub fn em_share_within(&self, limit: usize) -> f64 {
        if self.em_iterations.is_empty() {
            return 0.0;
        }
        self.em_iterations.iter().filter(|&&k| k <= limit).count() as f64 / self.em_iterations.len() as f64
    }
}

/// Containment results of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub hits: Vec<(Estimator, Vec<bool>)>,
    pub failures: Vec<(Estimator, String)>,
    pub em_iterations: Option<(usize, bool)>,
    pub extinct_redraws: usize,
    pub abandoned: bool,
}

/// Seed of redraw `attempt` of replicate `index`.
fn replicate_seed(base: u64, index: usize, attempt: usize) -> u64 {
    base ^ (index as u64) ^ ((attempt as u64) << 32)
}

/// Simulates until an epidemic reaches `stop_m`; returns the record and the
/// number of extinct draws discarded.
pub fn simulate_replicate(config: &CoverageConfig, index: usize) -> Result<(Option<EpidemicRecord>, usize)> {
    for attempt in 0..=config.max_redraws {
        let sim = SimulationConfig { seed: replicate_seed(config.simulation.seed, index, attempt), ..config.simulation.clone() };
        let out = simulate_epidemic(&sim)?;
        if !out.extinct {
            return Ok((Some(out.record), attempt));
        }
    }
    Ok((None, config.max_redraws + 1))
}

/// Quantiles of the possible contact intervals and the true cumulative hazard
/// there; mass-action truth is the normalized `Lambda_*`.
fn truth_grid(config: &CoverageConfig, record: &EpidemicRecord) -> Vec<(f64, f64)> {
    let risk = record.risk_set();
    config
        .quantiles
        .iter()
        .map(|&q| {
            let tau = risk.quantile(q).unwrap_or(0.0);
            (tau, config.simulation.contact.cumulative_hazard(tau))
        })
        .collect()
}

fn covers(est: &StepEstimate, grid: &[(f64, f64)], alpha: f64, survival: bool) -> Vec<bool> {
    grid.iter()
        .map(|&(tau, lambda)| {
            let truth = if survival { (-lambda).exp() } else { lambda };
            est.interval(tau, alpha).contains(truth)
        })
        .collect()
}

pub fn run_replicate(config: &CoverageConfig, index: usize) -> Result<ReplicateOutcome> {
    let (record, extinct_redraws) = simulate_replicate(config, index)?;
    let Some(record) = record else {
        return Ok(ReplicateOutcome { hits: vec![], failures: vec![], em_iterations: None, extinct_redraws, abandoned: true });
    };
    let grid = truth_grid(config, &record);
    let mass_action = record.contacts.is_mass_action();
    let mut out = ReplicateOutcome { hits: vec![], failures: vec![], em_iterations: None, extinct_redraws, abandoned: false };

    let observed: Vec<Estimator> = config.estimators.iter().copied().filter(|e| !e.is_marginal()).collect();
    for e in observed {
        let est = match (e, mass_action) {
            (Estimator::NelsonAalen, false) => nelson_aalen(&record),
            (Estimator::NelsonAalen, true) => nelson_aalen_mass_action(&record),
            (Estimator::KaplanMeier, false) => kaplan_meier(&record),
            (_, true) => kaplan_meier_mass_action(&record),
            _ => unreachable!(),
        };
        match est {
            Ok(est) => out.hits.push((e, covers(&est, &grid, config.alpha, e == Estimator::KaplanMeier))),
            Err(err) => out.failures.push((e, err.to_string())),
        }
    }

    let marginal: Vec<Estimator> = config.estimators.iter().copied().filter(|e| e.is_marginal()).collect();
    if !marginal.is_empty() {
        let mut unobserved = record.clone();
        unobserved.infectors = vec![None; record.n()];
        let result = if mass_action {
            em_estimate_mass_action(&unobserved, &config.em)
        } else {
            em_estimate(&unobserved, &config.em)
        };
        match result {
            Ok(res) => {
                out.em_iterations = Some((res.iterations(), res.converged));
                for e in marginal {
                    let (est, survival) = match e {
                        Estimator::MarginalNelsonAalen => (&res.cumulative_hazard, false),
                        _ => (&res.survival, true),
                    };
                    out.hits.push((e, covers(est, &grid, config.alpha, survival)));
                }
            }
            Err(err) => out.failures.extend(marginal.into_iter().map(|e| (e, err.to_string()))),
        }
    }
    Ok(out)
}

/// Runs all replicates in parallel and aggregates in replicate order, so the
/// report does not depend on the thread count.
pub fn coverage_study(config: &CoverageConfig) -> Result<CoverageReport> {
    if config.replicates == 0 {
        return Err(Error::InvalidParameter("coverage study needs at least one replicate".into()));
    }
    config.simulation.validate()?;
    let outcomes: Vec<ReplicateOutcome> =
        (0..config.replicates).into_par_iter().map(|r| run_replicate(config, r)).collect::<Result<_>>()?;
    Ok(aggregate(config, &outcomes))
}

pub fn aggregate(config: &CoverageConfig, outcomes: &[ReplicateOutcome]) -> CoverageReport {
    let mut report = CoverageReport {
        rows: vec![],
        replicates: config.replicates,
        failures: vec![],
        em_iterations: vec![],
        em_nonconverged: 0,
        extinct_redraws: 0,
        abandoned: 0,
    };
    let mut counts = vec![vec![(0u64, 0u64); config.quantiles.len()]; config.estimators.len()];
    for (r, out) in outcomes.iter().enumerate() {
        report.extinct_redraws += out.extinct_redraws;
        report.abandoned += out.abandoned as usize;
        if let Some((iters, converged)) = out.em_iterations {
            report.em_iterations.push(iters);
            report.em_nonconverged += (!converged) as usize;
        }
        for (e, msg) in &out.failures {
            report.failures.push(ReplicateFailure { replicate: r, estimator: *e, message: msg.clone() });
        }
        for (e, hits) in &out.hits {
            let slot = config.estimators.iter().position(|x| x == e).expect("configured estimator");
            for (q, &hit) in hits.iter().enumerate() {
                counts[slot][q].0 += hit as u64;
                counts[slot][q].1 += 1;
            }
        }
    }
    for (slot, &estimator) in config.estimators.iter().enumerate() {
        for (q, &quantile) in config.quantiles.iter().enumerate() {
            let (hits, n) = counts[slot][q];
            let (lo, hi) = clopper_pearson(hits, n, 0.05).unwrap_or((f64::NAN, f64::NAN));
            let coverage = if n > 0 { hits as f64 / n as f64 } else { f64::NAN };
            report.rows.push(CoverageRow { estimator, quantile, hits, n, coverage, lo, hi });
        }
    }
    report
}
