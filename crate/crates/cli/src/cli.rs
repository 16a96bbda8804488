use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "contact-intervals", version, about = "Contact-interval survival analysis of epidemic data")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads for parallel studies (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// TOML file with default option values; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Suppress the summary printed on stdout.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one SEIR epidemic and write the record.
    Simulate(SimulateArgs),
    /// Estimate the contact-interval cumulative hazard or survival from a record.
    Estimate(EstimateArgs),
    /// Monte Carlo coverage of the pointwise confidence limits.
    CoverageStudy(CoverageArgs),
    /// Marginal estimates from daily household onset data.
    HouseholdAnalyze(HouseholdArgs),
    /// Household secondary attack rate under a fixed contact probability.
    SarSim(SarArgs),
    /// Write a synthetic household data set.
    HouseholdFixture(FixtureArgs),
}

pub const SUBCOMMANDS: [&str; 6] =
    ["simulate", "estimate", "coverage-study", "household-analyze", "sar-sim", "household-fixture"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Network,
    Massaction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Smoother {
    Spline,
    Kernel,
}

#[derive(Debug, Clone, Args)]
pub struct PopulationArgs {
    #[arg(long, value_enum, default_value = "network")]
    pub mode: Mode,
    /// Population size.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Watts-Strogatz neighbours per node (even).
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Watts-Strogatz rewiring probability.
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    /// Contact-interval model, e.g. `weibull,2,1` or `exponential,1`.
    #[arg(long, default_value = "weibull,2,1")]
    pub contact: String,
    /// Latent period distribution, e.g. `constant,0`.
    #[arg(long, default_value = "constant,0")]
    pub latent: String,
    /// Infectious period distribution.
    #[arg(long, default_value = "exponential,1")]
    pub infectious: String,
    /// Imported infections at time 0.
    #[arg(long, default_value_t = 1)]
    pub initial: usize,
    /// Stop observing at this many infections.
    #[arg(long, default_value_t = 300)]
    pub stop_m: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub population: PopulationArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Leave the infector column empty.
    #[arg(long)]
    pub hide_infectors: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EmArgs {
    /// EM stopping tolerance on the L1 difference (default .0005, or .005 under mass action).
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub min_iterations: usize,
    #[arg(long, default_value_t = 50)]
    pub max_iterations: usize,
    #[arg(long, value_enum, default_value = "spline")]
    pub smoother: Smoother,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Record CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Edge list of a network record (default: edges.csv next to the input).
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// nelson-aalen, kaplan-meier, marginal-na or marginal-km.
    #[arg(long, default_value = "marginal-na")]
    pub method: String,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CoverageArgs {
    /// One of table1-w05, table1-exp, table1-w2, table2-w05, table2-exp, table2-w2.
    /// Without a preset the population flags define the cell.
    #[arg(long)]
    pub preset: Option<String>,
    #[command(flatten)]
    pub population: PopulationArgs,
    /// Replicates (default 200, or 1000 with --paper-scale).
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Use n = 100,000, m = 1,000 and 1,000 replicates.
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Comma-separated estimators (default: all four).
    #[arg(long)]
    pub estimators: Option<String>,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct HouseholdInput {
    /// Household CSV `household_id,person_id,onset_day`.
    #[arg(long, conflicts_with = "fixture")]
    pub input: Option<PathBuf>,
    /// Use the bundled synthetic 58-household fixture.
    #[arg(long)]
    pub fixture: bool,
}

#[derive(Debug, Clone, Args)]
pub struct HouseholdArgs {
    #[command(flatten)]
    pub households: HouseholdInput,
    #[arg(long, default_value_t = 2)]
    pub incubation: i64,
    #[arg(long, default_value_t = 0)]
    pub latent: i64,
    #[arg(long, default_value_t = 6)]
    pub infectious: i64,
    /// Also run the natural-history sensitivity grid.
    #[arg(long)]
    pub sensitivity: bool,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SarArgs {
    #[command(flatten)]
    pub households: HouseholdInput,
    /// Per-pair household infectious contact probability.
    #[arg(long, default_value_t = 0.07)]
    pub probability: f64,
    #[arg(long, default_value_t = 10_000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FixtureArgs {
    #[arg(long, default_value_t = contact_core::harness::household::FIXTURE_SEED)]
    pub seed: u64,
    /// Household infectious contact probability over the infectious period.
    #[arg(long, default_value_t = 0.07)]
    pub probability: f64,
    #[arg(long, default_value_t = 2)]
    pub incubation: i64,
    #[arg(long, default_value_t = 0)]
    pub latent: i64,
    #[arg(long, default_value_t = 6)]
    pub infectious: i64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}
