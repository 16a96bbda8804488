//! Survival analysis of contact intervals from epidemic data.

pub mod error;
pub mod chain_binomial;
pub mod em;
pub mod fit;
pub mod harness;
pub mod hazard;
pub mod io;
pub mod nelson_aalen;
pub mod network;
pub mod optimize;
pub mod record;
pub mod simulate;
pub mod smoothing;
pub mod stats;
pub mod step;

pub use error::{Error, Result};
pub use hazard::{Family, HazardModel};
pub use record::{ContactStructure, EpidemicRecord, Infection, Network, PersonHistory, RiskSet};
pub use step::{EstimateKind, StepEstimate};
