use std::path::PathBuf;

use abroca::distfit::Family;
use abroca::PConvention;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "abroca",
    version,
    about = "ABROCA significance testing and power analysis",
    args_override_self = true
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Flags accepted before or after the subcommand.
pub const GLOBAL_FLAGS: [&str; 4] = ["seed", "threads", "out-dir", "format"];

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Common {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (default: all available cores). Never changes results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory receiving output files and their manifests.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Format of the main output file.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// JSON object supplying any flag by name; command-line flags win.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Randomization test of the ABROCA between the two groups of a CSV file.
    #[command(args_override_self = true)]
    Test(TestArgs),
    /// Monte Carlo power over a grid of sample sizes, effect sizes and imbalances.
    #[command(args_override_self = true)]
    Power(PowerArgs),
    /// ABROCA values of datasets simulated under equal group AUCs.
    #[command(name = "gen-null", args_override_self = true)]
    GenNull(GenNullArgs),
    /// Fit candidate distributions to ABROCA samples.
    #[command(args_override_self = true)]
    Fit(FitArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Test(_) => "test",
            Command::Power(_) => "power",
            Command::GenNull(_) => "gen-null",
            Command::Fit(_) => "fit",
        }
    }
}

pub const SUBCOMMANDS: [&str; 4] = ["test", "power", "gen-null", "fit"];

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PermutationArgs {
    /// Number of permutations per test.
    #[arg(long, default_value_t = 1000)]
    pub n_iter_test: usize,

    /// p-value convention: smoothed (k+1)/(n+1) or paper k/n with strict exceedance.
    #[arg(long, default_value = "smoothed")]
    #[serde(serialize_with = "ser_convention")]
    pub p_convention: PConvention,

    /// Redraws allowed for a permutation that leaves a group with one outcome class.
    #[arg(long, default_value_t = 100)]
    pub max_resample: u32,

    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

fn ser_convention<S: serde::Serializer>(c: &PConvention, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(c.name())
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TestArgs {
    /// CSV with header score,label,group.
    pub input: PathBuf,

    #[command(flatten)]
    #[serde(flatten)]
    pub perm: PermutationArgs,

    /// Enumerate every group assignment instead of sampling permutations.
    #[arg(long)]
    pub exact: bool,

    /// Also write the null ABROCA samples to this CSV file.
    #[arg(long)]
    pub null_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PowerArgs {
    /// Total test-set sizes: comma list and/or start:stop:step ranges.
    #[arg(long, alias = "test-set-size", alias = "n-total-sample", default_value = "1000", value_delimiter = ',')]
    pub n_total: Vec<String>,

    /// AUC differences between the groups.
    #[arg(long, default_value = "0.1", value_delimiter = ',')]
    pub auc_diff: Vec<String>,

    /// Fractions of instances in group 0.
    #[arg(long, default_value = "0.5", value_delimiter = ',')]
    pub ratio_group: Vec<String>,

    /// Fractions of positive outcomes within each group.
    #[arg(long, default_value = "0.5", value_delimiter = ',')]
    pub ratio_pos_case: Vec<String>,

    /// AUC level around which each difference is split symmetrically.
    #[arg(long, default_value_t = abroca::power::DEFAULT_BASELINE_AUC)]
    pub baseline_auc: f64,

    /// Simulated datasets per grid cell.
    #[arg(long, default_value_t = 500)]
    pub n_iter_power: usize,

    #[command(flatten)]
    #[serde(flatten)]
    pub perm: PermutationArgs,

    /// Also render power_curve.svg.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenNullArgs {
    /// Population AUC of group 0.
    #[arg(long, default_value_t = 0.75)]
    pub auc_1: f64,

    /// Population AUC of group 1 (defaults to --auc-1).
    #[arg(long)]
    pub auc_2: Option<f64>,

    #[arg(long, alias = "test-set-size", alias = "n-total-sample", default_value_t = 1000)]
    pub n_total: usize,

    #[arg(long, default_value_t = 0.5)]
    pub ratio_group: f64,

    #[arg(long, default_value_t = 0.5)]
    pub ratio_pos_case: f64,

    /// Positive fraction for group 1 when it differs from group 0.
    #[arg(long)]
    pub ratio_pos_case_group1: Option<f64>,

    /// Number of simulated datasets (one ABROCA value each).
    #[arg(long, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_draws: u64,

    /// Allow different group AUCs (an alternative rather than a null distribution).
    #[arg(long)]
    pub allow_alt: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FitArgs {
    /// CSV of positive reals (column `abroca`, or the first column).
    pub input: PathBuf,

    /// Families to fit.
    #[arg(long, value_delimiter = ',', default_value = "weibull,normal,student_t,fisher_f")]
    #[serde(serialize_with = "ser_families")]
    pub family: Vec<Family>,
}

fn ser_families<S: serde::Serializer>(f: &[Family], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(f.iter().map(|x| x.name()))
}
