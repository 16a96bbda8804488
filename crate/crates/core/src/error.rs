use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("person {0} is imported, no infectious set")]
    ImportedNoInfectiousSet(usize),
    #[error("person {0} was never infected")]
    NotInfected(usize),
    #[error("person {0} has an empty infectious set (inconsistent record)")]
    EmptyInfectiousSet(usize),
    #[error("person {0} has no recorded infector")]
    MissingInfector(usize),
    #[error("recorded infector {infector} of person {infectee} was not infectious at the infection time")]
    InvalidInfector { infectee: usize, infector: usize },
    #[error("event age {age} of person {infectee} lies outside (0, {end}]")]
    EventAgeOutOfRange { infectee: usize, age: f64, end: f64 },
    #[error("operation requires a {expected} record")]
    WrongMode { expected: &'static str },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("hazard evaluated outside its domain at {0}")]
    Domain(f64),
    #[error("all candidate hazards are zero for person {0}")]
    DegenerateHazard(usize),
    #[error("smoothing needs at least {needed} jumps, got {got}; fall back to a flat hazard")]
    TooFewJumps { needed: usize, got: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("optimizer failed to converge after {iterations} iterations (step {step:.3e}, objective change {change:.3e})")]
    NoConvergence { iterations: usize, step: f64, change: f64 },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }
}
