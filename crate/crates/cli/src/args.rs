use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use liquid_auction::auctions::AuctionRule;

#[derive(Debug, Parser)]
#[command(name = "lpa", version, about = "Liquid payment auction experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic market and write it as CSV.
    Gen {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory for sellers.csv, requests.csv and manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Offline LPA at the pacing equilibrium against each rule run online.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Rules to run online.
        #[arg(long = "rule", value_delimiter = ',', default_values_t = AuctionRule::ALL.to_vec())]
        rules: Vec<AuctionRule>,
    },
    /// One online run per (rule, kappa), for Pareto frontiers.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long = "rule", value_delimiter = ',', default_values_t = AuctionRule::ALL.to_vec())]
        rules: Vec<AuctionRule>,
        /// Experience weights; defaults to 2^-4, ..., 2^4.
        #[arg(long, value_delimiter = ',')]
        kappa_sweep: Option<Vec<f64>>,
    },
    /// Compute, verify and certify the pacing equilibrium.
    Certify {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Largest accepted duality gap, as a fraction of the primal value.
        #[arg(long, default_value_t = 0.01)]
        max_gap: f64,
    },
    /// Search a misreport grid for a profitable deviation by one seller.
    Ic {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Seller id, as in the sellers file.
        #[arg(long)]
        seller: String,
        /// Accepted gain, as a fraction of the truthful value.
        #[arg(long, default_value_t = 0.005)]
        tolerance: f64,
        #[arg(long, value_delimiter = ',')]
        budget_factors: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        roi_factors: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Synthetic,
    RealworldShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Where the market comes from: a synthetic generator or CSV files.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long, value_enum, conflicts_with_all = ["sellers", "requests"])]
    pub preset: Option<Preset>,
    /// Generator settings as JSON; flags below override it.
    #[arg(long, conflicts_with_all = ["preset", "sellers", "requests"])]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of requests. Without --budget-max the budget ceiling scales
    /// with it.
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub budget_max: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, requires = "requests", conflicts_with_all = ["n", "t", "budget_max"])]
    pub sellers: Option<PathBuf>,
    #[arg(long, requires = "sellers")]
    pub requests: Option<PathBuf>,
    /// Slot exposure rates, e.g. `1,0.6,0.4`.
    #[arg(long, value_delimiter = ',')]
    pub slots: Option<Vec<f64>>,
    /// Experience weight; overrides the preset.
    #[arg(long)]
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Pacing learning rate.
    #[arg(long, default_value_t = liquid_auction::pacing::DEFAULT_ETA)]
    pub eta: f64,
    /// Equilibrium tolerance, in (0, 0.5).
    #[arg(long, default_value_t = liquid_auction::equilibrium::DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Bisection precision; defaults to epsilon / 100.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Report spend without capping it at the budget.
    #[arg(long)]
    pub no_truncate: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Directory for report files and manifest.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Format of the report printed on stdout.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}
