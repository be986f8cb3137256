//! `engage`: fit engagement models, build features and backtests from a
//! corpus directory, or generate synthetic corpora.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use engage_core::error::{AnalyticsError, CorpusError, EstimationError, FeatureError};
use engage_core::features::EstimationMode;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "engage", version, about = "Social-media engagement coefficients and threshold backtests")]
#[command(after_help = "EXAMPLES:\n  \
    engage validate --corpus data/\n  \
    engage fit --corpus data/ --out fit/ --mode prior_data\n  \
    engage pipeline --corpus data/ --out report/ --investment-dates 2021-06-01,2021-09-01\n  \
    engage simulate --out synthetic/ --seed 42 --topics 48")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args, Debug, Clone)]
struct GlobalArgs {
    /// Corpus directory with topics.csv, users.csv, posts.csv and prices.csv
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,

    /// Output directory (created if missing)
    #[arg(long, global = true, default_value = "engage-out")]
    out: PathBuf,

    /// Seed for every random choice (simulation, k-means restarts)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Interaction kinds, in posts.csv column order
    #[arg(long, global = true, default_value = "like,retweet,reply")]
    kinds: String,

    /// Kind whose interaction coefficient is pinned to 1
    #[arg(long, global = true, default_value = "like")]
    reference_kind: String,

    /// Engagement estimation mode: in_sample or prior_data
    #[arg(long, global = true, default_value = "in_sample")]
    mode: EstimationMode,

    /// Horizons / holding times in months, e.g. "1..12" or "1,3,6"
    #[arg(long, global = true, default_value = "1..12")]
    horizons: String,

    /// Comma-separated investment dates (YYYY-MM-DD) for historical backtests
    #[arg(long, global = true, value_delimiter = ',')]
    investment_dates: Vec<NaiveDate>,

    /// Fail on posts by unknown users (false drops them with a warning)
    #[arg(long, global = true, default_value_t = true, action = clap::ArgAction::Set)]
    strict_users: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and check a corpus, reporting its size and any problems
    Validate,
    /// Fit the engagement model and write model.json and fit_report.json
    Fit(FitArgs),
    /// Write the per-topic feature table (features.csv)
    Features,
    /// Returns, dependence curves and bot-cluster returns
    Evaluate(ClusterArgs),
    /// Quartile-threshold and historical backtests
    Backtest,
    /// Generate a synthetic corpus directory
    Simulate(SimulateArgs),
    /// Features, evaluation and backtests in one run
    Pipeline(ClusterArgs),
}

#[derive(Args, Debug, Clone)]
struct FitArgs {
    /// Estimator: the closed form or the numeric maximizer
    #[arg(long, value_enum, default_value_t = FitMethodArg::ClosedForm)]
    method: FitMethodArg,

    /// Stationarity tolerance of the numeric maximizer
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,

    /// Iteration limit of the numeric maximizer
    #[arg(long, default_value_t = 10_000)]
    max_iterations: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum FitMethodArg {
    ClosedForm,
    Numeric,
}

#[derive(Args, Debug, Clone)]
struct ClusterArgs {
    /// Number of bot-probability clusters
    #[arg(long, default_value_t = 3)]
    clusters: usize,

    /// k-means restarts
    #[arg(long, default_value_t = engage_core::features::DEFAULT_RESTARTS)]
    restarts: usize,
}

#[derive(Args, Debug, Clone)]
struct SimulateArgs {
    /// JSON universe spec; flags below override its fields
    #[arg(long)]
    spec: Option<PathBuf>,

    #[arg(long)]
    topics: Option<usize>,

    /// Engagement coefficients: one value for every topic, or one per topic
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,

    #[arg(long)]
    users: Option<usize>,

    #[arg(long)]
    posts_per_topic: Option<u64>,
}

/// Parse "1..12", "3" or comma-separated mixes of both.
fn parse_horizons(text: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u32 = a.trim().parse().with_context(|| format!("bad horizon range `{part}`"))?;
            let b: u32 = b.trim().parse().with_context(|| format!("bad horizon range `{part}`"))?;
            if a > b {
                bail!("empty horizon range `{part}`");
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().with_context(|| format!("bad horizon `{part}`"))?);
        }
    }
    if out.is_empty() || out.contains(&0) {
        bail!("horizons must be a non-empty list of positive month counts");
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// One-line JSON error record for stderr.
fn error_record(err: &anyhow::Error) -> Value {
    let mut record = json!({ "message": format!("{err:#}") });
    for cause in err.chain() {
        let corpus = cause.downcast_ref::<CorpusError>().or_else(|| match cause.downcast_ref::<FeatureError>() {
            Some(FeatureError::Corpus(c)) => Some(c),
            _ => None,
        });
        if let Some(c) = corpus {
            record["kind"] = json!("corpus");
            match c {
                CorpusError::Row { file, row, column, .. } => {
                    record["file"] = json!(file);
                    record["row"] = json!(row);
                    record["column"] = json!(column);
                }
                CorpusError::Record { file, row, .. } => {
                    record["file"] = json!(file);
                    record["row"] = json!(row);
                }
                CorpusError::MissingColumn { file, column } => {
                    record["file"] = json!(file);
                    record["column"] = json!(column);
                }
                CorpusError::Io { file, .. } => record["file"] = json!(file),
                CorpusError::MissingFile(path) => record["file"] = json!(path.display().to_string()),
                _ => {}
            }
            break;
        }
        if cause.is::<EstimationError>() {
            record["kind"] = json!("estimation");
            break;
        }
        if cause.is::<AnalyticsError>() {
            record["kind"] = json!("analytics");
            break;
        }
        if cause.is::<FeatureError>() {
            record["kind"] = json!("features");
            break;
        }
    }
    if record.get("kind").is_none() {
        record["kind"] = json!("usage");
    }
    json!({ "error": record })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ENGAGE_LOG", "warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_record(&err));
            ExitCode::FAILURE
        }
    }
}
