use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fdscope", version, about = "Discover and validate dependencies in tabular data")]
pub struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum)]
    pub output: Option<OutputMode>,

    /// Engine threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// TOML file with default values for any option. Flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    Human,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine exact or approximate functional dependencies.
    #[command(subcommand)]
    Discover(Discover),
    /// Check a metric functional dependency.
    #[command(subcommand)]
    Validate(Validate),
    /// Data-quality workflows built on the engines.
    #[command(subcommand)]
    Scenario(Scenario),
    /// Run the HTTP task service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum Discover {
    Fd(FdArgs),
    Afd(AfdArgs),
}

#[derive(Debug, Subcommand)]
pub enum Validate {
    Mfd(MfdArgs),
}

#[derive(Debug, Subcommand)]
pub enum Scenario {
    /// Find likely typos through almost-holding dependencies.
    Typo(TypoArgs),
    /// Find and resolve near-duplicate rows.
    Dedup(DedupArgs),
    /// Compare dependencies across successive partitions.
    Anomaly(AnomalyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CsvArgs {
    /// Field separator.
    #[arg(long)]
    pub separator: Option<char>,
    /// The first line holds data, not column names.
    #[arg(long)]
    pub no_header: bool,
    /// Cell text that stands for a missing value.
    #[arg(long, value_name = "TOKEN")]
    pub null: Option<String>,
    /// Treat missing values as distinct from each other.
    #[arg(long)]
    pub nulls_distinct: bool,
}

#[derive(Debug, Args)]
pub struct FdArgs {
    #[arg(long)]
    pub max_lhs: Option<usize>,
    #[command(flatten)]
    pub csv: CsvArgs,
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct AfdArgs {
    /// Largest tolerated g1 error, as a decimal or a fraction like 1/20.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<String>,
    #[arg(long)]
    pub max_lhs: Option<usize>,
    #[command(flatten)]
    pub csv: CsvArgs,
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct MfdArgs {
    /// Left-hand side attributes, by name or 0-based index.
    #[arg(long, value_delimiter = ',')]
    pub lhs: Vec<String>,
    /// Right-hand side attributes.
    #[arg(long, value_delimiter = ',')]
    pub rhs: Vec<String>,
    /// levenshtein or euclidean; chosen from the rhs type when omitted.
    #[arg(long)]
    pub metric: Option<String>,
    /// Largest allowed distance between rows that agree on the lhs.
    #[arg(short = 'p', long = "p", allow_hyphen_values = true)]
    pub p: Option<f64>,
    #[command(flatten)]
    pub csv: CsvArgs,
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct TypoArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<String>,
    /// Edit distance that counts as "close to the central value".
    #[arg(long, allow_hyphen_values = true)]
    pub radius: Option<f64>,
    /// Share of a cluster that must fall inside the radius.
    #[arg(long, allow_hyphen_values = true)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub max_lhs: Option<usize>,
    /// Show clusters that mostly fall inside the radius instead.
    #[arg(long)]
    pub invert_display: bool,
    #[command(flatten)]
    pub csv: CsvArgs,
    pub file: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AutoMode {
    KeepFirst,
    KeepSecond,
    Skip,
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    /// AFD threshold for ranking key candidates.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<String>,
    /// Sorted-neighbourhood window size.
    #[arg(long)]
    pub window: Option<usize>,
    /// Attributes that must match for a pair to be reported.
    #[arg(short = 'k', long = "k")]
    pub k: Option<usize>,
    /// Never use this attribute as the sort key. Repeatable.
    #[arg(long = "exclude-key", value_name = "ATTR")]
    pub exclude_keys: Vec<String>,
    /// Skip key candidates with no repeated value.
    #[arg(long)]
    pub exclude_unique: bool,
    /// Resolve every proposed pair the same way without asking.
    #[arg(long, value_enum, conflicts_with_all = ["answers", "interactive"])]
    pub auto: Option<AutoMode>,
    /// Read decisions from FILE, one per line, as typed at the prompt.
    #[arg(long, value_name = "FILE", conflicts_with = "interactive")]
    pub answers: Option<PathBuf>,
    /// Ask about each pair on the terminal.
    #[arg(long, short = 'i')]
    pub interactive: bool,
    /// Write the decision journal as JSON.
    #[arg(long, value_name = "FILE")]
    pub journal: Option<PathBuf>,
    /// Write the deduplicated table.
    #[arg(long, value_name = "FILE")]
    pub output_csv: Option<PathBuf>,
    #[command(flatten)]
    pub csv: CsvArgs,
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnomalyArgs {
    #[arg(long)]
    pub max_lhs: Option<usize>,
    /// Ascending AFD thresholds probed for each lost dependency.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub thresholds: Vec<String>,
    /// Upper end of the MFD distance sweep; one standard deviation when omitted.
    #[arg(short = 'd', long = "d", allow_hyphen_values = true)]
    pub d: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub step: Option<f64>,
    #[arg(long)]
    pub metric: Option<String>,
    /// Make each partition's dependencies the new canonical set.
    #[arg(long)]
    pub accept: bool,
    /// Analyse the union of the partitions seen so far.
    #[arg(long)]
    pub cumulative: bool,
    /// JSON state carried between runs; created when missing.
    #[arg(long, value_name = "FILE")]
    pub state: Option<PathBuf>,
    #[command(flatten)]
    pub csv: CsvArgs,
    /// Partitions in arrival order.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub addr: Option<String>,
    /// Storage root for datasets, tasks and results.
    #[arg(long, env = "FDSCOPE_STORAGE", value_name = "DIR")]
    pub storage: Option<PathBuf>,
    /// Tasks run concurrently.
    #[arg(long)]
    pub workers: Option<usize>,
}
