use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use contact_core::em::{em_estimate, em_estimate_mass_action, EmConfig, EmResult};
use contact_core::harness::coverage::{coverage_study, CoverageConfig, Estimator, Preset, Scale};
use contact_core::harness::household::{
    household_analyze, sar_forward_simulation, sensitivity_analysis, simulate_households, synthetic_layout, daily_hazard,
    HouseholdAnalysis, HouseholdData, HouseholdOptions, NaturalHistory,
};
use contact_core::io;
use contact_core::nelson_aalen::{kaplan_meier, kaplan_meier_mass_action, nelson_aalen, nelson_aalen_mass_action};
use contact_core::simulate::{simulate_epidemic, DurationModel, SimulationConfig, SimulationMode};
use contact_core::smoothing::SmootherConfig;
use contact_core::{ContactStructure, EpidemicRecord, HazardModel, StepEstimate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cli::{
    CoverageArgs, EmArgs, EstimateArgs, FixtureArgs, HouseholdArgs, HouseholdInput, Mode, PopulationArgs, SarArgs,
    SimulateArgs, Smoother,
};
use crate::errors::UsageError;
use crate::output::{read_input, OutDir};

/// Printed summary lines, suppressed by `--quiet`.
pub struct Report {
    pub quiet: bool,
}

impl Report {
    fn line(&self, s: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", s.as_ref());
        }
    }
}

fn warn(s: impl AsRef<str>) {
    eprintln!("warning: {}", s.as_ref());
}

fn usage<T: std::str::FromStr<Err = contact_core::Error>>(what: &str, s: &str) -> Result<T> {
    s.parse().map_err(|e: contact_core::Error| UsageError(format!("--{what}: {e}")).into())
}

fn simulation_config(p: &PopulationArgs, seed: u64) -> Result<SimulationConfig> {
    let mode = match p.mode {
        Mode::Network => SimulationMode::Network { k: p.k, p: p.p },
        Mode::Massaction => SimulationMode::MassAction,
    };
    let contact: HazardModel = usage("contact", &p.contact)?;
    let mut config = SimulationConfig::new(mode, p.n, contact, p.stop_m, seed);
    config.latent = usage::<DurationModel>("latent", &p.latent)?;
    config.infectious = usage::<DurationModel>("infectious", &p.infectious)?;
    config.initial_infections = p.initial;
    config.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(config)
}

fn population_settings(c: &SimulationConfig) -> Vec<(&'static str, String)> {
    let mode = match c.mode {
        SimulationMode::Network { k, p } => format!("network,k={k},p={p}"),
        SimulationMode::MassAction => "massaction".into(),
    };
    vec![
        ("mode", mode),
        ("n", c.n.to_string()),
        ("contact", c.contact.to_string()),
        ("latent", c.latent.to_string()),
        ("infectious", c.infectious.to_string()),
        ("initial", c.initial_infections.to_string()),
        ("stop_m", c.stop_m.to_string()),
        ("seed", c.seed.to_string()),
    ]
}

fn em_config(args: &EmArgs, mass_action: bool) -> Result<EmConfig> {
    let mut config = if mass_action { EmConfig::mass_action() } else { EmConfig::default() };
    if let Some(t) = args.tolerance {
        config.tolerance = t;
    }
    config.min_iterations = args.min_iterations;
    config.max_iterations = args.max_iterations;
    config.smoother = match args.smoother {
        Smoother::Spline => SmootherConfig::default(),
        Smoother::Kernel => SmootherConfig::kernel(),
    };
    if !(config.tolerance > 0.0) || config.min_iterations > config.max_iterations || config.max_iterations == 0 {
        bail!(UsageError(format!(
            "EM needs tolerance > 0 and 1 <= min <= max iterations (got {}, {}, {})",
            config.tolerance, config.min_iterations, config.max_iterations
        )));
    }
    Ok(config)
}

fn em_settings(c: &EmConfig) -> Vec<(&'static str, String)> {
    let smoother = match c.smoother.kind {
        contact_core::smoothing::SmootherKind::SplineGcv => "spline",
        contact_core::smoothing::SmootherKind::Kernel(_) => "kernel",
    };
    vec![
        ("em_tolerance", c.tolerance.to_string()),
        ("em_min_iterations", c.min_iterations.to_string()),
        ("em_max_iterations", c.max_iterations.to_string()),
        ("smoother", smoother.into()),
    ]
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!(UsageError(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs, report: &Report) -> Result<()> {
    let config = simulation_config(&args.population, args.seed)?;
    let outcome = simulate_epidemic(&config)?;
    let mut record = outcome.record;
    if args.hide_infectors {
        record.infectors = vec![None; record.n()];
    }
    let mut out = OutDir::create(&args.out)?;
    out.write("record.csv", |buf| Ok(io::write_record(&record, buf)?))?;
    if let ContactStructure::Network(net) = &record.contacts {
        out.write("edges.csv", |buf| Ok(io::write_edges(net, buf)?))?;
    }
    let mut settings = population_settings(&config);
    settings.push(("hide_infectors", args.hide_infectors.to_string()));
    settings.push(("infections", record.infection_count().to_string()));
    settings.push(("end_time", io::num(record.end_time)));
    settings.push(("extinct", outcome.extinct.to_string()));
    out.finish("simulate", &settings)?;
    if outcome.extinct {
        warn(format!("epidemic died out after {} infections", record.infection_count()));
    }
    report.line(format!("{} infections by T = {}", record.infection_count(), record.end_time));
    Ok(())
}

pub fn load_record(input: &Path, edges: Option<&Path>) -> Result<EpidemicRecord> {
    let text = read_input(input)?;
    let header = io::RecordHeader::parse(text.lines().next().unwrap_or(""))?;
    let edge_text = if header.mass_action {
        None
    } else {
        let path: PathBuf = match edges {
            Some(p) => p.to_path_buf(),
            None => input.with_file_name("edges.csv"),
        };
        Some(read_input(&path)?)
    };
    io::read_record(&text, edge_text.as_deref()).with_context(|| format!("reading record {}", input.display()))
}

fn write_em_outputs(out: &mut OutDir, res: &EmResult) -> Result<()> {
    out.write("weights.csv", |buf| Ok(io::write_weights(&res.weights, buf)?))?;
    out.write("iterations.csv", |buf| Ok(io::write_iteration_log(&res.log, buf)?))
}

pub fn estimate(args: &EstimateArgs, report: &Report) -> Result<()> {
    check_alpha(args.alpha)?;
    let method: Estimator = usage("method", &args.method)?;
    let record = load_record(&args.input, args.edges.as_deref())?;
    let mass_action = record.contacts.is_mass_action();
    let mut out = OutDir::create(&args.out)?;
    let mut settings = vec![
        ("input", args.input.display().to_string()),
        ("method", method.name().to_string()),
        ("alpha", args.alpha.to_string()),
        ("mass_action", mass_action.to_string()),
    ];
    let est: StepEstimate = match method {
        Estimator::NelsonAalen | Estimator::KaplanMeier => {
            let km = method == Estimator::KaplanMeier;
            match (km, mass_action) {
                (false, false) => nelson_aalen(&record)?,
                (false, true) => nelson_aalen_mass_action(&record)?,
                (true, false) => kaplan_meier(&record)?,
                (true, true) => kaplan_meier_mass_action(&record)?,
            }
        }
        Estimator::MarginalNelsonAalen | Estimator::MarginalKaplanMeier => {
            let config = em_config(&args.em, mass_action)?;
            let mut unobserved = record.clone();
            unobserved.infectors = vec![None; record.n()];
            let res = if mass_action { em_estimate_mass_action(&unobserved, &config)? } else { em_estimate(&unobserved, &config)? };
            write_em_outputs(&mut out, &res)?;
            settings.extend(em_settings(&config));
            settings.push(("em_iterations", res.iterations().to_string()));
            settings.push(("em_converged", res.converged.to_string()));
            if !res.converged {
                warn(format!("EM did not reach tolerance {} in {} iterations", config.tolerance, res.iterations()));
            }
            if method == Estimator::MarginalKaplanMeier { res.survival } else { res.cumulative_hazard }
        }
    };
    out.write("estimate.csv", |buf| Ok(io::write_estimate(&est, args.alpha, buf)?))?;
    out.finish("estimate", &settings)?;
    report.line(format!("{}: {} jumps, value {} at {}", method, est.len(), est.values.last().copied().unwrap_or(0.0), est.horizon));
    Ok(())
}

pub fn coverage(args: &CoverageArgs, report: &Report) -> Result<()> {
    let scale = if args.paper_scale { Scale::Paper } else { Scale::Desk };
    let mut config: CoverageConfig = match &args.preset {
        Some(name) => usage::<Preset>("preset", name)?.config(scale, args.seed),
        None => {
            let mut sim = simulation_config(&args.population, args.seed)?;
            let (n, m, reps) = scale.dimensions();
            if args.paper_scale {
                sim.n = n;
                sim.stop_m = m;
            }
            CoverageConfig::new(sim, reps)
        }
    };
    if let Some(r) = args.replicates {
        config.replicates = r;
    }
    if config.replicates == 0 {
        bail!(UsageError("--replicates must be positive".into()));
    }
    if let Some(list) = &args.estimators {
        config.estimators = list.split(',').map(|s| usage::<Estimator>("estimators", s)).collect::<Result<_>>()?;
    }
    config.em = em_config(&args.em, matches!(config.simulation.mode, SimulationMode::MassAction))?;
    let result = coverage_study(&config)?;

    let mut out = OutDir::create(&args.out)?;
    out.write("coverage.csv", |buf| Ok(io::write_coverage(&result, buf)?))?;
    out.write("em_iterations.csv", |buf| {
        let mut counts = std::collections::BTreeMap::<usize, usize>::new();
        for &k in &result.em_iterations {
            *counts.entry(k).or_default() += 1;
        }
        buf.extend_from_slice(b"iterations,replicates\n");
        for (k, c) in counts {
            buf.extend_from_slice(format!("{k},{c}\n").as_bytes());
        }
        Ok(())
    })?;
    if !result.failures.is_empty() {
        out.write("failures.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["replicate", "estimator", "message"])?;
            for f in &result.failures {
                w.write_record([f.replicate.to_string(), f.estimator.name().to_string(), f.message.clone()])?;
            }
            w.flush()?;
            Ok(())
        })?;
        warn(format!("{} estimator failures excluded; see failures.csv", result.failures.len()));
    }
    let mut settings = vec![("preset", args.preset.clone().unwrap_or_else(|| "custom".into()))];
    settings.extend(population_settings(&config.simulation));
    settings.push(("replicates", config.replicates.to_string()));
    settings.push(("estimators", config.estimators.iter().map(|e| e.name()).collect::<Vec<_>>().join(",")));
    settings.extend(em_settings(&config.em));
    settings.push(("em_nonconverged", result.em_nonconverged.to_string()));
    settings.push(("extinct_redraws", result.extinct_redraws.to_string()));
    settings.push(("abandoned", result.abandoned.to_string()));
    out.finish("coverage-study", &settings)?;
    if result.em_nonconverged > 0 {
        warn(format!("EM did not converge in {} replicates", result.em_nonconverged));
    }
    for row in &result.rows {
        report.line(format!(
            "{:<12} q={:.2} {:>4}/{:<4} {:.3} ({:.3}, {:.3})",
            row.estimator.name(),
            row.quantile,
            row.hits,
            row.n,
            row.coverage,
            row.lo,
            row.hi
        ));
    }
    Ok(())
}

fn load_households(input: &HouseholdInput) -> Result<(HouseholdData, String)> {
    match (&input.input, input.fixture) {
        (Some(path), false) => {
            let text = read_input(path)?;
            let data = io::read_households(&text).with_context(|| format!("reading households {}", path.display()))?;
            Ok((data, path.display().to_string()))
        }
        (None, true) => Ok((io::read_households(io::SYNTHETIC_HOUSEHOLDS_CSV)?, "bundled-synthetic-fixture".into())),
        _ => bail!(UsageError("give either --input or --fixture".into())),
    }
}

const SUMMARY_HEADER: &str = "incubation,latent,infectious,households_used,secondary_cases,iterations,converged,\
cumhaz,cumhaz_lo,cumhaz_hi,survival,survival_lo,survival_hi,contact_probability,contact_lo,contact_hi";

fn summary_row(a: &HouseholdAnalysis) -> String {
    let nh = a.natural_history;
    let nums = [
        a.cumulative_hazard.value,
        a.cumulative_hazard.lower,
        a.cumulative_hazard.upper,
        a.survival.value,
        a.survival.lower,
        a.survival.upper,
        a.contact_probability.value,
        a.contact_probability.lower,
        a.contact_probability.upper,
    ];
    let mut row = format!(
        "{},{},{},{},{},{},{}",
        nh.incubation,
        nh.latent,
        nh.infectious,
        a.households_used,
        a.secondary_cases,
        a.em.iterations(),
        a.em.converged
    );
    for x in nums {
        row.push_str(&format!(",{}", io::num(x)));
    }
    row
}

pub fn household(args: &HouseholdArgs, report: &Report) -> Result<()> {
    check_alpha(args.alpha)?;
    let (data, source) = load_households(&args.households)?;
    let nh = NaturalHistory::new(args.incubation, args.latent, args.infectious).map_err(|e| UsageError(e.to_string()))?;
    let options = HouseholdOptions { em: em_config(&args.em, false)?, alpha: args.alpha, ..HouseholdOptions::default() };
    let a = household_analyze(&data, &nh, &options)?;

    let mut out = OutDir::create(&args.out)?;
    out.write("estimate.csv", |buf| Ok(io::write_estimate(&a.em.cumulative_hazard, args.alpha, buf)?))?;
    out.write("survival.csv", |buf| Ok(io::write_estimate(&a.em.survival, args.alpha, buf)?))?;
    write_em_outputs(&mut out, &a.em)?;
    out.write("summary.csv", |buf| Ok(buf.extend_from_slice(format!("{SUMMARY_HEADER}\n{}\n", summary_row(&a)).as_bytes())))?;
    out.write("parametric.csv", |buf| {
        buf.extend_from_slice(b"family,param1,param2,loglik,cumhaz,contact_probability\n");
        for p in &a.parametric {
            let params = p.fit.model.params();
            let p2 = params.get(1).map(|&x| io::num(x)).unwrap_or_default();
            let family = p.fit.model.family().map(|f| f.name()).unwrap_or("smoothed");
            buf.extend_from_slice(
                format!(
                    "{family},{},{p2},{},{},{}\n",
                    io::num(params[0]),
                    io::num(p.fit.log_likelihood),
                    io::num(p.cumulative_hazard),
                    io::num(p.contact_probability)
                )
                    .as_bytes(),
            );
        }
        Ok(())
    })?;
    out.write("problems.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["household_id", "message"])?;
        for p in &a.problems {
            w.write_record([&p.household, &p.message])?;
        }
        w.flush()?;
        Ok(())
    })?;
    if args.sensitivity {
        let cells = sensitivity_analysis(&data, &NaturalHistory::sensitivity_grid(), &options);
        out.write("sensitivity.csv", |buf| {
            buf.extend_from_slice(format!("{SUMMARY_HEADER},error\n").as_bytes());
            for c in &cells {
                let line = match &c.result {
                    Ok(a) => format!("{},\n", summary_row(a)),
                    Err(e) => {
                        let nh = c.natural_history;
                        format!("{},{},{}{},\"{}\"\n", nh.incubation, nh.latent, nh.infectious, ",".repeat(13), e.to_string().replace('"', "'"))
                    }
                };
                buf.extend_from_slice(line.as_bytes());
            }
            Ok(())
        })?;
        out.write("sensitivity_curves.csv", |buf| {
            buf.extend_from_slice(b"incubation,latent,infectious,tau,cumhaz\n");
            for c in &cells {
                if let Ok(a) = &c.result {
                    let nh = c.natural_history;
                    let est = &a.em.cumulative_hazard;
                    for k in 0..est.len() {
                        buf.extend_from_slice(
                            format!(
                                "{},{},{},{},{}\n",
                                nh.incubation,
                                nh.latent,
                                nh.infectious,
                                io::num(est.times[k]),
                                io::num(est.values[k])
                            ).as_bytes(),
                        );
                    }
                }
            }
            Ok(())
        })?;
        for c in &cells {
            match &c.result {
                Ok(a) if !a.em.converged => warn(format!("EM did not converge under {}", c.natural_history)),
                Err(e) => warn(format!("{}: {e}", c.natural_history)),
                _ => {}
            }
        }
    }
    let mut settings = vec![
        ("input", source),
        ("incubation", nh.incubation.to_string()),
        ("latent", nh.latent.to_string()),
        ("infectious", nh.infectious.to_string()),
        ("alpha", args.alpha.to_string()),
        ("sensitivity", args.sensitivity.to_string()),
    ];
    settings.extend(em_settings(&options.em));
    settings.push(("em_converged", a.em.converged.to_string()));
    settings.push(("households_excluded", a.problems.len().to_string()));
    out.finish("household-analyze", &settings)?;
    if !a.em.converged {
        warn("EM did not converge");
    }
    for p in &a.problems {
        warn(format!("household {} excluded: {}", p.household, p.message));
    }
    report.line(format!("cumulative hazard at day {}: {}", nh.infectious, a.cumulative_hazard));
    report.line(format!("household infectious contact probability: {}", a.contact_probability));
    Ok(())
}

pub fn sar(args: &SarArgs, report: &Report) -> Result<()> {
    let (data, source) = load_households(&args.households)?;
    let layout = data.layout();
    let s = sar_forward_simulation(&layout, args.probability, args.replicates, args.seed)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("sar.csv", |buf| {
        buf.extend_from_slice(b"replicate,sar\n");
        for (r, x) in s.replicates.iter().enumerate() {
            buf.extend_from_slice(format!("{},{}\n", r + 1, io::num(*x)).as_bytes());
        }
        Ok(())
    })?;
    out.write("summary.csv", |buf| Ok(buf.extend_from_slice(format!("mean,lo,hi\n{},{},{}\n", io::num(s.mean), io::num(s.lower), io::num(s.upper)).as_bytes())))?;
    out.finish(
        "sar-sim",
        &[
            ("input", source),
            ("probability", args.probability.to_string()),
            ("replicates", args.replicates.to_string()),
            ("seed", args.seed.to_string()),
        ],
    )?;
    report.line(format!("mean household SAR {:.3} (2.5%-97.5%: {:.3}, {:.3})", s.mean, s.lower, s.upper));
    Ok(())
}

pub fn fixture(args: &FixtureArgs, report: &Report) -> Result<()> {
    if !(0.0..1.0).contains(&args.probability) {
        bail!(UsageError(format!("--probability must lie in [0, 1), got {}", args.probability)));
    }
    let nh = NaturalHistory::new(args.incubation, args.latent, args.infectious).map_err(|e| UsageError(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let data = simulate_households(&synthetic_layout(), &nh, daily_hazard(args.probability, nh.infectious), &mut rng)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("households.csv", |buf| Ok(io::write_households(&data, buf)?))?;
    out.finish(
        "household-fixture",
        &[
            ("seed", args.seed.to_string()),
            ("probability", args.probability.to_string()),
            ("incubation", nh.incubation.to_string()),
            ("latent", nh.latent.to_string()),
            ("infectious", nh.infectious.to_string()),
            ("synthetic", "true".into()),
        ],
    )?;
    report.line(format!(
        "{} households, {} members, {} primary and {} secondary cases",
        data.households.len(),
        data.member_count(),
        data.primary_count(),
        data.secondary_count()
    ));
    Ok(())
}
