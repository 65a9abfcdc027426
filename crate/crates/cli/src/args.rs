use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kltail::copulas::{CopulaModel, Family};
use kltail::inference::{BootstrapSource, Calibration, HalfSampleRule, MarginMode};
use kltail::margins::StandardMargin;
use kltail::partition::RiskFunctional;

#[derive(Debug, Parser)]
#[command(name = "kltail", version, about = "Two-sample test for equality of extremal dependence")]
pub struct Cli {
    /// Worker threads for bootstrap replicates and repetitions (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Directory for artifacts.
    #[arg(long, global = true, env = "KLTAIL_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transform a raw sample to unit-Pareto margins.
    Standardize(StandardizeArgs),
    /// Test whether two samples share their extremal dependence.
    Test(TestArgs),
    /// Compare the bootstrap null with a freshly simulated null.
    Nulls(NullsArgs),
    /// Rejection rates over a grid of exceedance counts or set counts.
    Power(PowerArgs),
    /// Draw a bivariate sample on uniform margins from a copula.
    Simulate(SimulateArgs),
    /// Compare the extremal dependence of rainfall maxima across seasons.
    Rainfall(RainfallArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RiskArg {
    Max,
    Min,
    /// Euclidean norm with angular sets.
    L2,
    /// Sum with angular sets.
    L1,
}

impl From<RiskArg> for RiskFunctional {
    fn from(r: RiskArg) -> Self {
        match r {
            RiskArg::Max => RiskFunctional::Max,
            RiskArg::Min => RiskFunctional::Min,
            RiskArg::L2 => RiskFunctional::Euclidean,
            RiskArg::L1 => RiskFunctional::Sum,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MarginsArg {
    Known,
    Empirical,
}

impl From<MarginsArg> for MarginMode {
    fn from(m: MarginsArg) -> Self {
        match m {
            MarginsArg::Known => MarginMode::Known,
            MarginsArg::Empirical => MarginMode::Empirical,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MarginalArg {
    Uniform,
    Pareto,
    Exponential,
}

impl From<MarginalArg> for StandardMargin {
    fn from(m: MarginalArg) -> Self {
        match m {
            MarginalArg::Uniform => StandardMargin::Uniform,
            MarginalArg::Pareto => StandardMargin::Pareto,
            MarginalArg::Exponential => StandardMargin::Exponential,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CalibrationArg {
    Chisq,
    Bootstrap,
}

impl From<CalibrationArg> for Calibration {
    fn from(c: CalibrationArg) -> Self {
        match c {
            CalibrationArg::Chisq => Calibration::ChiSquared,
            CalibrationArg::Bootstrap => Calibration::Bootstrap,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceArg {
    X,
    Pooled,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HalfRuleArg {
    HalfCount,
    SameCount,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Logistic,
    #[value(alias = "outer-power-clayton")]
    Clayton,
    #[value(alias = "asym")]
    AsymmetricLogistic,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Logistic => Family::Logistic,
            FamilyArg::Clayton => Family::OuterPowerClayton,
            FamilyArg::AsymmetricLogistic => Family::AsymmetricLogistic,
        }
    }
}

pub fn model(family: FamilyArg, theta: f64, psi: Option<&[f64]>) -> kltail::Result<CopulaModel> {
    let built = match family {
        FamilyArg::Logistic => CopulaModel::logistic(theta),
        FamilyArg::Clayton => CopulaModel::outer_power_clayton(theta),
        FamilyArg::AsymmetricLogistic => {
            let psi = match psi {
                Some(&[a, b]) => [a, b],
                _ => return Err(kltail::Error::Config("the asymmetric logistic needs --psi A,B".into())),
            };
            CopulaModel::asymmetric_logistic(theta, psi)
        }
    };
    // out-of-range parameters come straight from the command line
    built.map_err(|e| match e {
        kltail::Error::Domain(msg) => kltail::Error::Config(msg),
        other => other,
    })
}

/// Settings shared by every command that runs the test.
#[derive(Debug, Clone, Args)]
pub struct TestOptions {
    #[arg(long, value_enum, default_value = "l2")]
    pub risk: RiskArg,
    /// Number of sets K (angular risks; defaults to 4). Fixed by the
    /// dimension for max and min.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub sets: Option<u64>,
    #[arg(long, value_enum, default_value = "empirical")]
    pub margins: MarginsArg,
    /// Override the calibration (default: chisq for known, bootstrap for
    /// empirical margins).
    #[arg(long, value_enum)]
    pub calibration: Option<CalibrationArg>,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, value_enum, default_value = "x")]
    pub bootstrap_source: SourceArg,
    #[arg(long, value_enum, default_value = "half-count")]
    pub half_rule: HalfRuleArg,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TestOptions {
    pub fn config(&self, k_n: usize) -> kltail::TestConfig {
        let mut c = kltail::TestConfig::new(k_n);
        c.risk = self.risk.into();
        c.sets = self.sets.map(|k| k as usize);
        c.margins = self.margins.into();
        c.calibration = self.calibration.map(Into::into);
        c.bootstrap = self.bootstrap;
        c.bootstrap_source = match self.bootstrap_source {
            SourceArg::X => BootstrapSource::X,
            SourceArg::Pooled => BootstrapSource::Pooled,
        };
        c.half_rule = match self.half_rule {
            HalfRuleArg::HalfCount => HalfSampleRule::HalfCount,
            HalfRuleArg::SameCount => HalfSampleRule::SameCount,
        };
        c.level = self.level;
        c.seed = self.seed;
        c
    }
}

#[derive(Debug, Args)]
pub struct StandardizeArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "empirical")]
    pub margins: MarginsArg,
    /// Marginal distribution of every column when margins are known.
    #[arg(long, value_enum, default_value = "uniform")]
    pub marginal: MarginalArg,
    /// Output file (default: `<out-dir>/standardized.csv`).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    pub x: PathBuf,
    pub y: PathBuf,
    /// Number of exceedances k_n.
    #[arg(short = 'k', long)]
    pub k_exceedances: usize,
    /// Marginal distribution of every column when margins are known.
    #[arg(long, value_enum, default_value = "uniform")]
    pub marginal: MarginalArg,
    #[command(flatten)]
    pub test: TestOptions,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "logistic")]
    pub family: FamilyArg,
    #[arg(long)]
    pub theta: f64,
    /// Asymmetry weights of the asymmetric logistic, e.g. `--psi 1,0.3`.
    #[arg(long, num_args = 2, value_delimiter = ',')]
    pub psi: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(short = 'n', long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stream id within the seed.
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    /// Output file (default: `<out-dir>/sample.csv`).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NullsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(short = 'n', long, default_value_t = 2000)]
    pub n: usize,
    #[arg(short = 'k', long, default_value_t = 200)]
    pub k_exceedances: usize,
    #[arg(long, value_enum, default_value = "l2")]
    pub risk: RiskArg,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..), default_value_t = 4)]
    pub sets: u64,
    #[arg(long, value_enum, default_value = "known")]
    pub margins: MarginsArg,
    /// Replicates of each null.
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long, value_enum, default_value = "logistic")]
    pub family_x: FamilyArg,
    #[arg(long)]
    pub theta_x: f64,
    #[arg(long, num_args = 2, value_delimiter = ',')]
    pub psi_x: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "logistic")]
    pub family_y: FamilyArg,
    #[arg(long)]
    pub theta_y: f64,
    #[arg(long, num_args = 2, value_delimiter = ',')]
    pub psi_y: Option<Vec<f64>>,
    #[arg(short = 'n', long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    /// Grid of exceedance counts, e.g. `50,100,200,400`.
    #[arg(long, value_delimiter = ',', conflicts_with = "sets_grid")]
    pub k_grid: Option<Vec<usize>>,
    /// Grid of angular set counts; adds the max-risk baseline.
    #[arg(long, value_delimiter = ',')]
    pub sets_grid: Option<Vec<usize>>,
    /// Exceedances for a set-count grid.
    #[arg(short = 'k', long, default_value_t = 200)]
    pub k_exceedances: usize,
    #[arg(long, value_enum, default_value = "known")]
    pub margins: MarginsArg,
    #[command(flatten)]
    pub test: PowerTestOptions,
}

/// Test settings of a power study.
#[derive(Debug, Args)]
pub struct PowerTestOptions {
    #[arg(long, value_enum, default_value = "l2")]
    pub risk: RiskArg,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub sets: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RainfallArgs {
    pub input: PathBuf,
    #[arg(long, default_value = "timestamp")]
    pub timestamp_col: String,
    #[arg(long, default_value = "depth")]
    pub depth_col: String,
    /// Depth value meaning "not recorded".
    #[arg(long, default_value = "")]
    pub missing: String,
    #[arg(short = 'k', long, default_value_t = 220)]
    pub k_exceedances: usize,
    #[command(flatten)]
    pub test: TestOptions,
}
