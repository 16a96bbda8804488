//! CSV formats for records, estimates, weights, coverage reports and
//! household data.
//!
//! Person ids in files are 1-based; they map to 0-based indices in memory.
//! Floats are written in shortest round-trip form, so reading a written file
//! reproduces the values bit for bit.

use std::io::Write;

use crate::em::{EmIteration, WeightedEventSet};
use crate::error::{Error, Result};
use crate::harness::coverage::CoverageReport;
use crate::harness::household::{Household, HouseholdData, Member};
use crate::hazard::HazardModel;
use crate::record::{ContactStructure, EpidemicRecord, Infection, Network, PersonHistory};
use crate::step::{EstimateKind, StepEstimate};

/// The synthetic household fixture shipped with the crate (58 households,
/// generated by `synthetic_fixture(FIXTURE_SEED)`).
pub const SYNTHETIC_HOUSEHOLDS_CSV: &str = include_str!("../data/synthetic_households.csv");

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes())
}

fn line_of(row: &csv::StringRecord) -> usize {
    row.position().map_or(0, |p| p.line() as usize)
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?.clone();
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::parse(1, format!("expected header {}, got {}", expected.join(","), header.iter().collect::<Vec<_>>().join(","))));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, k: usize, name: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    let raw = row.get(k).unwrap_or("");
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse().map(Some).map_err(|e| Error::parse(line_of(row), format!("{name} {raw:?}: {e}")))
}

fn required<T: std::str::FromStr>(row: &csv::StringRecord, k: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field(row, k, name)?.ok_or_else(|| Error::parse(line_of(row), format!("missing {name}")))
}

/// Shortest round-trip text of `x`, in exponent form when very small or large.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Record header line: `#mode=network|massaction,n=<int>,T=<float>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordHeader {
    pub mass_action: bool,
    pub n: usize,
    pub end_time: f64,
}

impl RecordHeader {
    pub fn parse(line: &str) -> Result<Self> {
        let body = line.trim().strip_prefix('#').ok_or_else(|| Error::parse(1, "record must start with a #mode header"))?;
        let (mut mode, mut n, mut end) = (None, None, None);
        for kv in body.split(',') {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::parse(1, format!("malformed header entry {kv:?}")))?;
            match k.trim() {
                "mode" => mode = Some(v.trim().to_string()),
                "n" => n = Some(v.trim().parse::<usize>().map_err(|e| Error::parse(1, format!("n: {e}")))?),
                "T" => end = Some(v.trim().parse::<f64>().map_err(|e| Error::parse(1, format!("T: {e}")))?),
                other => return Err(Error::parse(1, format!("unknown header key {other:?}"))),
            }
        }
        let mass_action = match mode.as_deref() {
            Some("network") => false,
            Some("massaction") => true,
            other => return Err(Error::parse(1, format!("mode must be network or massaction, got {other:?}"))),
        };
        Ok(Self {
            mass_action,
            n: n.ok_or_else(|| Error::parse(1, "header lacks n"))?,
            end_time: end.ok_or_else(|| Error::parse(1, "header lacks T"))?,
        })
    }
}

const RECORD_HEADER: [&str; 5] = ["id", "t_infection", "latent", "infectious_duration", "infector"];

pub fn write_record<W: Write>(record: &EpidemicRecord, w: W) -> Result<()> {
    let mut w = w;
    let mode = if record.contacts.is_mass_action() { "massaction" } else { "network" };
    writeln!(w, "#mode={mode},n={},T={}", record.n(), num(record.end_time))?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RECORD_HEADER)?;
    for (k, p) in record.persons.iter().enumerate() {
        let inf = p.infection;
        out.write_record([
            (k + 1).to_string(),
            opt(inf.map(|i| i.time)),
            opt(inf.map(|i| i.latent)),
            opt(inf.map(|i| i.infectious)),
            record.infectors[k].map(|i| (i + 1).to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Directed edge list `i,j`.
pub fn write_edges<W: Write>(network: &Network, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["i", "j"])?;
    for (i, j) in network.directed_edges() {
        out.write_record([(i + 1).to_string(), (j + 1).to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_edges(text: &str, n: usize) -> Result<Network> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &["i", "j"])?;
    let mut edges = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let i: usize = required(&row, 0, "i")?;
        let j: usize = required(&row, 1, "j")?;
        if i == 0 || j == 0 || i > n || j > n {
            return Err(Error::parse(line_of(&row), format!("edge ({i},{j}) outside 1..={n}")));
        }
        edges.push((i - 1, j - 1));
    }
    Network::from_directed_edges(n, edges)
}

/// Reads a record; network records need the companion edge list. Persons
/// infected at time 0 are the imported cases.
pub fn read_record(text: &str, edges: Option<&str>) -> Result<EpidemicRecord> {
    let first = text.lines().next().ok_or_else(|| Error::parse(1, "empty record file"))?;
    let header = RecordHeader::parse(first)?;
    let mut rdr = reader(text);
    check_header(&mut rdr, &RECORD_HEADER)?;
    let mut persons = Vec::with_capacity(header.n);
    let mut infectors = Vec::with_capacity(header.n);
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let id: usize = required(&row, 0, "id")?;
        if id != persons.len() + 1 {
            return Err(Error::parse(line, format!("ids must run 1..n in order, got {id}")));
        }
        let t: Option<f64> = field(&row, 1, "t_infection")?;
        let latent: Option<f64> = field(&row, 2, "latent")?;
        let infectious: Option<f64> = field(&row, 3, "infectious_duration")?;
        let person = match (t, latent, infectious) {
            (None, None, None) => PersonHistory::susceptible(),
            (Some(t), Some(l), Some(d)) => {
                let inf = Infection::new(t, l, d);
                if t == 0.0 {
                    PersonHistory::imported(inf)
                } else {
                    PersonHistory::infected(inf)
                }
            }
            _ => return Err(Error::parse(line, "infection time, latent and infectious duration must be all set or all empty")),
        };
        persons.push(person);
        let infector: Option<usize> = field(&row, 4, "infector")?;
        infectors.push(match infector {
            Some(0) => return Err(Error::parse(line, "infector ids start at 1")),
            v => v.map(|i| i - 1),
        });
    }
    if persons.len() != header.n {
        return Err(Error::parse(1, format!("header says n={}, file has {} persons", header.n, persons.len())));
    }
    let contacts = if header.mass_action {
        ContactStructure::MassAction { n: header.n }
    } else {
        let edges = edges.ok_or_else(|| Error::InvalidRecord("network record needs an edge list".into()))?;
        ContactStructure::Network(read_edges(edges, header.n)?)
    };
    EpidemicRecord::new(persons, contacts, header.end_time)?.with_infectors(infectors)
}

/// `tau,cumhaz,var,lo95,hi95` (or `survival` in place of `cumhaz`), one row
/// per jump, with limits at level `alpha`.
pub fn write_estimate<W: Write>(est: &StepEstimate, alpha: f64, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let name = match est.kind {
        EstimateKind::CumulativeHazard => "cumhaz",
        EstimateKind::Survival => "survival",
    };
    out.write_record(["tau", name, "var", "lo95", "hi95"])?;
    for k in 0..est.len() {
        let tau = est.times[k];
        let ci = est.interval(tau, alpha);
        out.write_record([tau, est.values[k], est.variances[k], ci.lower, ci.upper].map(num))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the value and variance columns back into a step estimate.
pub fn read_estimate(text: &str, horizon: f64) -> Result<StepEstimate> {
    let mut rdr = reader(text);
    let kind = match rdr.headers()?.get(1) {
        Some("cumhaz") => EstimateKind::CumulativeHazard,
        Some("survival") => EstimateKind::Survival,
        other => return Err(Error::parse(1, format!("unknown estimate column {other:?}"))),
    };
    let (mut times, mut values, mut variances) = (vec![], vec![], vec![]);
    for row in rdr.records() {
        let row = row?;
        times.push(required(&row, 0, "tau")?);
        values.push(required(&row, 1, "value")?);
        variances.push(required(&row, 2, "var")?);
    }
    let mut increments = Vec::with_capacity(values.len());
    let mut prev = if kind == EstimateKind::Survival { 1.0 } else { 0.0 };
    for &v in &values {
        increments.push(match kind {
            EstimateKind::CumulativeHazard => v - prev,
            EstimateKind::Survival => if prev > 0.0 { 1.0 - v / prev } else { 0.0 },
        });
        prev = v;
    }
    Ok(StepEstimate { kind, times, increments, values, variances, horizon })
}

/// Infector probabilities `j,i,tau,p` with 1-based ids.
pub fn write_weights<W: Write>(weights: &WeightedEventSet, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["j", "i", "tau", "p"])?;
    for inf in &weights.infectees {
        for c in &inf.candidates {
            out.write_record([(inf.infectee + 1).to_string(), (c.infector + 1).to_string(), num(c.age), num(c.p)])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_iteration_log<W: Write>(log: &[EmIteration], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iter", "l1diff"])?;
    for it in log {
        out.write_record([it.iteration.to_string(), num(it.l1_difference)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_coverage<W: Write>(report: &CoverageReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["estimator", "quantile", "hits", "n", "coverage", "lo", "hi"])?;
    for r in &report.rows {
        out.write_record([
            r.estimator.name().to_string(),
            num(r.quantile),
            r.hits.to_string(),
            r.n.to_string(),
            num(r.coverage),
            num(r.lo),
            num(r.hi),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `household_id,person_id,onset_day`, blank onset for members never ill.
pub fn write_households<W: Write>(data: &HouseholdData, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["household_id", "person_id", "onset_day"])?;
    for h in &data.households {
        for m in &h.members {
            out.write_record([h.id.as_str(), m.id.as_str(), &m.onset.map(|d| d.to_string()).unwrap_or_default()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Rows of one household must be contiguous; household order is kept.
pub fn read_households(text: &str) -> Result<HouseholdData> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &["household_id", "person_id", "onset_day"])?;
    let mut households: Vec<Household> = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let hid = row.get(0).unwrap_or("");
        let pid = row.get(1).unwrap_or("");
        if hid.is_empty() || pid.is_empty() {
            return Err(Error::parse(line, "household and person ids are required"));
        }
        let onset: Option<i64> = field(&row, 2, "onset_day")?;
        let member = Member { id: pid.to_string(), onset };
        match households.last_mut() {
            Some(h) if h.id == hid => {
                if h.members.iter().any(|m| m.id == pid) {
                    return Err(Error::parse(line, format!("duplicate person {pid} in household {hid}")));
                }
                h.members.push(member);
            }
            _ => {
                if households.iter().any(|h| h.id == hid) {
                    return Err(Error::parse(line, format!("rows of household {hid} are not contiguous")));
                }
                households.push(Household { id: hid.to_string(), members: vec![member] });
            }
        }
    }
    Ok(HouseholdData { households })
}

/// Hazard of a smoothed (or any) model on `grid` as `tau,hazard`.
pub fn write_hazard_grid<W: Write>(model: &HazardModel, grid: &[f64], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["tau", "hazard"])?;
    for &tau in grid {
        out.write_record([num(tau), num(model.hazard(tau)?)])?;
    }
    out.flush()?;
    Ok(())
}
