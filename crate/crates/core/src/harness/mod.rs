//! Reproducible studies built on the estimators.

pub mod coverage;
pub mod household;

pub use coverage::{coverage_study, CoverageConfig, CoverageReport, CoverageRow, Estimator};
pub use household::{household_analyze, sar_forward_simulation, sensitivity_analysis, HouseholdData, NaturalHistory};
