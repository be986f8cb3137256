use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use engage_core::analytics::{dependence_curves, median_cluster_returns, PriceSeries, ReturnMatrix};
use engage_core::backtest::{run_historical_backtest, run_quartile_grid, BacktestResult};
use engage_core::corpus::{Corpus, DatasetOptions, InteractionDataset, InteractionKindSet};
use engage_core::engagement::{fit_closed_form, fit_numeric, FitReport, NumericOptions};
use engage_core::error::AnalyticsError;
use engage_core::features::{cluster_bot_probabilities, EstimationMode, FeatureBuilder, FeatureName, FeatureTable};
use engage_core::report;
use engage_core::synth::{generate_universe, AlphaSpec, UniverseSpec};
use log::{info, warn};
use serde_json::{json, Value};

use crate::output::OutDir;
use crate::{parse_horizons, ClusterArgs, Cli, Command, FitArgs, FitMethodArg, SimulateArgs};

const HISTORICAL_QUANTILES: [u32; 4] = [25, 50, 75, 100];

/// Effective parameters shared by every subcommand.
struct Run<'a> {
    cli: &'a Cli,
    kinds: InteractionKindSet,
    horizons: Vec<u32>,
}

pub fn run(cli: &Cli) -> Result<()> {
    let run = Run {
        cli,
        kinds: InteractionKindSet::parse(&cli.global.kinds, &cli.global.reference_kind)?,
        horizons: parse_horizons(&cli.global.horizons)?,
    };
    if let Some(corpus) = &cli.global.corpus {
        check_distinct(corpus, &cli.global.out)?;
    }
    match &cli.command {
        Command::Simulate(args) => simulate(&run, args),
        Command::Validate => validate(&run),
        Command::Fit(args) => fit(&run, args),
        Command::Features => features(&run),
        Command::Evaluate(args) => evaluate(&run, args),
        Command::Backtest => backtest(&run),
        Command::Pipeline(args) => pipeline(&run, args),
    }
}

fn check_distinct(corpus: &Path, out: &Path) -> Result<()> {
    let a = std::path::absolute(corpus)?;
    let b = std::path::absolute(out)?;
    let same = match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    };
    if same {
        bail!("--out must differ from --corpus ({})", corpus.display());
    }
    Ok(())
}

impl Run<'_> {
    fn strict(&self) -> bool {
        self.cli.global.strict_users
    }

    fn mode(&self) -> EstimationMode {
        self.cli.global.mode
    }

    fn load(&self) -> Result<Corpus> {
        let dir = self
            .cli
            .global
            .corpus
            .as_ref()
            .context("--corpus is required for this subcommand")?;
        let corpus = Corpus::load(dir, &self.kinds).with_context(|| format!("loading corpus {}", dir.display()))?;
        info!(
            "loaded {} topics, {} users, {} posts, {} price series",
            corpus.topics.len(),
            corpus.profiles.len(),
            corpus.posts.len(),
            corpus.prices.len()
        );
        Ok(corpus)
    }

    /// Output directory with the config echo already written.
    fn out(&self, command: &str, options: Value) -> Result<OutDir> {
        let g = &self.cli.global;
        let mut out = OutDir::create(&g.out)?;
        let config = json!({
            "command": command,
            "corpus": g.corpus.as_ref().map(|p| p.display().to_string()),
            "out": g.out.display().to_string(),
            "seed": g.seed,
            "kinds": self.kinds.names(),
            "reference_kind": self.kinds.reference_name(),
            "mode": g.mode.as_str(),
            "horizons": self.horizons,
            "investment_dates": g.investment_dates.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            "strict_users": g.strict_users,
            "options": options,
        });
        out.json("config.json", &config)?;
        Ok(out)
    }

    fn dataset_options(&self) -> DatasetOptions {
        DatasetOptions {
            strict_users: self.strict(),
            ..DatasetOptions::default()
        }
    }
}

fn validate(run: &Run) -> Result<()> {
    let corpus = run.load()?;
    let mut out = run.out("validate", json!({}))?;
    let ds = corpus.build_dataset(&run.dataset_options())?;
    let kind_totals: serde_json::Map<String, Value> = run
        .kinds
        .names()
        .iter()
        .enumerate()
        .map(|(i, k)| (k.clone(), json!(ds.kind_interactions(i))))
        .collect();
    let without_prices: Vec<&str> = corpus
        .topics
        .iter()
        .filter(|t| !corpus.prices.contains_key(&t.topic_id))
        .map(|t| t.topic_id.as_str())
        .collect();
    let summary = json!({
        "topics": corpus.topics.len(),
        "users": corpus.profiles.len(),
        "posts": corpus.posts.len(),
        "posts_used": ds.posts.len(),
        "dropped_posts": ds.dropped_posts,
        "price_series": corpus.prices.len(),
        "total_interactions": ds.total_interactions(),
        "kind_totals": kind_totals,
        "uncovered_topics": ds.uncovered_topics(),
        "topics_without_prices": without_prices,
        "warnings": corpus.warnings,
    });
    out.json("validation.json", &summary)?;
    println!(
        "ok: {} topics, {} users, {} posts ({} dropped), {} price series, {} warnings",
        corpus.topics.len(),
        corpus.profiles.len(),
        corpus.posts.len(),
        ds.dropped_posts,
        corpus.prices.len(),
        corpus.warnings.len()
    );
    Ok(())
}

fn run_fit(ds: &InteractionDataset, args: &FitArgs) -> Result<FitReport, engage_core::EstimationError> {
    match args.method {
        FitMethodArg::ClosedForm => fit_closed_form(ds),
        FitMethodArg::Numeric => fit_numeric(
            ds,
            NumericOptions {
                tolerance: args.tolerance,
                max_iterations: args.max_iterations,
            },
        ),
    }
}

/// File-name-safe form of a topic id.
fn model_file_name(topic_id: &str, used: &mut BTreeSet<String>) -> String {
    let stem: String = topic_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    let mut name = format!("models/{stem}.json");
    let mut n = 2;
    while !used.insert(name.clone()) {
        name = format!("models/{stem}-{n}.json");
        n += 1;
    }
    name
}

fn fit(run: &Run, args: &FitArgs) -> Result<()> {
    let corpus = run.load()?;
    let method = match args.method {
        FitMethodArg::ClosedForm => "closed_form",
        FitMethodArg::Numeric => "numeric",
    };
    let mut out = run.out(
        "fit",
        json!({"method": method, "tolerance": args.tolerance, "max_iterations": args.max_iterations}),
    )?;

    match run.mode() {
        EstimationMode::InSample => {
            let ds = corpus.build_dataset(&run.dataset_options())?;
            let report = run_fit(&ds, args).context("fitting the engagement model")?;
            out.text("model.json", &report.to_json())?;
            out.json(
                "fit_report.json",
                &json!({
                    "mode": "in_sample",
                    "posts_used": ds.posts.len(),
                    "dropped_posts": ds.dropped_posts,
                    "fit": report.diagnostics(),
                }),
            )?;
            println!(
                "fitted {} topics ({} excluded); model written to {}",
                report.model.alpha.len(),
                report.excluded_topics.len(),
                out.path().join("model.json").display()
            );
        }
        EstimationMode::PriorData => {
            out.remove_stale("model.json")?;
            let builder = FeatureBuilder::new(&corpus).strict_users(run.strict());
            let mut used = BTreeSet::new();
            let mut entries = Vec::new();
            let mut failures = Vec::new();
            for topic in &corpus.topics {
                let options = builder.prior_data_options(topic);
                let cutoff = options.cutoff.map(|c| c.to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
                let ds = corpus.build_dataset(&options)?;
                match run_fit(&ds, args) {
                    Ok(report) => {
                        let file = model_file_name(&topic.topic_id, &mut used);
                        out.text(&file, &report.to_json())?;
                        entries.push(json!({
                            "topic_id": topic.topic_id,
                            "cutoff": cutoff,
                            "model_file": file,
                            "alpha": report.model.alpha.get(&topic.topic_id),
                            "fit": report.diagnostics(),
                        }));
                    }
                    Err(e) => {
                        warn!("prior-data fit for `{}` failed: {e}", topic.topic_id);
                        failures.push(format!("{}: {e}", topic.topic_id));
                        entries.push(json!({
                            "topic_id": topic.topic_id,
                            "cutoff": cutoff,
                            "error": e.to_string(),
                        }));
                    }
                }
            }
            out.json("fit_report.json", &json!({"mode": "prior_data", "topics": entries}))?;
            if !failures.is_empty() {
                bail!("prior-data fit failed for {} topic(s): {}", failures.len(), failures.join("; "));
            }
            println!("fitted {} prior-data models into {}", corpus.topics.len(), out.path().join("models").display());
        }
    }
    Ok(())
}

fn feature_stage(run: &Run, corpus: &Corpus) -> Result<(FeatureTable, Value)> {
    let table = FeatureBuilder::new(corpus).strict_users(run.strict()).table(run.mode())?;
    let unavailable: Vec<Value> = table
        .rows
        .values()
        .filter_map(|r| {
            r.engagement_note
                .as_ref()
                .map(|note| json!({"topic_id": r.topic_id, "reason": note}))
        })
        .collect();
    for u in &unavailable {
        warn!("no engagement coefficient for {}: {}", u["topic_id"], u["reason"]);
    }
    let flagged: Vec<&str> = table
        .rows
        .values()
        .filter(|r| r.manipulation_flag())
        .map(|r| r.topic_id.as_str())
        .collect();
    let summary = json!({
        "mode": table.mode.as_str(),
        "topics": table.rows.len(),
        "engagement_unavailable": unavailable,
        "possible_manipulation": flagged,
    });
    Ok((table, summary))
}

fn evaluate_stage(run: &Run, args: &ClusterArgs, corpus: &Corpus, table: &FeatureTable, out: &mut OutDir) -> Result<Value> {
    let returns = ReturnMatrix::compute(&corpus.topics, &corpus.prices, &run.horizons);
    out.csv("returns.csv", |w| report::write_returns(w, &returns))?;
    let cells = dependence_curves(table, &returns);
    out.csv("dependence.csv", |w| report::write_dependence(w, &cells))?;

    let mut notes = Vec::new();
    let bots = table.values(FeatureName::BotProbability);
    let clustering = if bots.is_empty() {
        notes.push("cluster_returns.csv not written: no topic has a mean bot probability".to_string());
        None
    } else {
        match cluster_bot_probabilities(&bots, args.clusters, run.cli.global.seed, args.restarts) {
            Ok(c) => Some(c),
            Err(e) => {
                notes.push(format!("cluster_returns.csv not written: {e}"));
                None
            }
        }
    };
    let clustering_summary = match &clustering {
        Some(c) => {
            let cells = median_cluster_returns(c, &returns);
            out.csv("cluster_returns.csv", |w| report::write_cluster_returns(w, &cells))?;
            json!({"k": c.k, "centers": c.centers, "sizes": c.sizes(), "inertia": c.inertia})
        }
        None => {
            out.remove_stale("cluster_returns.csv")?;
            Value::Null
        }
    };
    for n in &notes {
        warn!("{n}");
    }

    let without_prices: Vec<&str> = corpus
        .topics
        .iter()
        .filter(|t| !corpus.prices.contains_key(&t.topic_id))
        .map(|t| t.topic_id.as_str())
        .collect();
    let missing_returns = returns.rows.values().flatten().filter(|r| r.is_none()).count();
    let unavailable_cells: Vec<Value> = cells
        .iter()
        .filter(|c| c.abs_spearman.is_none() || c.auc.is_none())
        .map(|c| json!({"feature": c.feature.as_str(), "horizon_months": c.horizon_months, "n_topics": c.n_topics}))
        .collect();
    Ok(json!({
        "horizons": run.horizons,
        "topics_without_prices": without_prices,
        "missing_returns": missing_returns,
        "dependence_cells_unavailable": unavailable_cells,
        "clustering": clustering_summary,
        "notes": notes,
    }))
}

fn backtest_stage(run: &Run, table: &FeatureTable, prices: &BTreeMap<String, PriceSeries>, out: &mut OutDir) -> Result<Value> {
    let (mut results, unavailable) = run_quartile_grid(table, prices, &run.horizons)?;
    let mut historical_unavailable = Vec::new();
    for &date in &run.cli.global.investment_dates {
        'feature: for feature in FeatureName::ALL {
            for q in HISTORICAL_QUANTILES {
                for &h in &run.horizons {
                    match run_historical_backtest(table, prices, feature, q, h, date) {
                        Ok(r) => results.push(r),
                        Err(AnalyticsError::ThresholdUnavailable(reason)) => {
                            historical_unavailable.push(json!({
                                "investment_date": date.to_string(),
                                "feature": feature.as_str(),
                                "reason": reason,
                            }));
                            continue 'feature;
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            }
        }
    }
    out.csv("backtest.csv", |w| report::write_backtests(w, &results))?;
    out.csv("trades.csv", |w| report::write_trades(w, &results))?;

    let mut skipped: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in &results {
        for (topic, reason) in &r.skipped {
            skipped.entry(topic).or_default().insert(reason);
        }
    }
    let empty = results.iter().filter(|r| r.portfolio_return.is_none()).count();
    Ok(json!({
        "strategies": results.len(),
        "trades": results.iter().map(|r: &BacktestResult| r.trades.len()).sum::<usize>(),
        "empty_portfolios": empty,
        "skipped_topics": skipped,
        "unavailable_features": unavailable
            .iter()
            .map(|(f, reason)| json!({"feature": f.as_str(), "reason": reason}))
            .collect::<Vec<_>>(),
        "historical_unavailable": historical_unavailable,
    }))
}

fn write_summary(out: &mut OutDir, command: &str, corpus: &Corpus, sections: Vec<(&str, Value)>) -> Result<()> {
    let mut files: Vec<String> = out.written().to_vec();
    files.push("run_summary.json".into());
    let mut summary = json!({ "command": command, "files": files });
    for (name, v) in sections {
        summary[name] = v;
    }
    summary["corpus_warnings"] = json!(corpus.warnings);
    out.json("run_summary.json", &summary)
}

fn cluster_options(args: &ClusterArgs) -> Value {
    json!({"clusters": args.clusters, "restarts": args.restarts})
}

fn features(run: &Run) -> Result<()> {
    let corpus = run.load()?;
    let mut out = run.out("features", json!({}))?;
    let (table, summary) = feature_stage(run, &corpus)?;
    out.csv("features.csv", |w| report::write_features(w, &table))?;
    write_summary(&mut out, "features", &corpus, vec![("features", summary)])
}

fn evaluate(run: &Run, args: &ClusterArgs) -> Result<()> {
    let corpus = run.load()?;
    let mut out = run.out("evaluate", cluster_options(args))?;
    let (table, feature_summary) = feature_stage(run, &corpus)?;
    let evaluation = evaluate_stage(run, args, &corpus, &table, &mut out)?;
    write_summary(
        &mut out,
        "evaluate",
        &corpus,
        vec![("features", feature_summary), ("evaluation", evaluation)],
    )
}

fn backtest(run: &Run) -> Result<()> {
    let corpus = run.load()?;
    let mut out = run.out("backtest", json!({}))?;
    let (table, feature_summary) = feature_stage(run, &corpus)?;
    let backtests = backtest_stage(run, &table, &corpus.prices, &mut out)?;
    write_summary(
        &mut out,
        "backtest",
        &corpus,
        vec![("features", feature_summary), ("backtest", backtests)],
    )
}

fn pipeline(run: &Run, args: &ClusterArgs) -> Result<()> {
    let corpus = run.load()?;
    let mut out = run.out("pipeline", cluster_options(args))?;
    let (table, feature_summary) = feature_stage(run, &corpus)?;
    out.csv("features.csv", |w| report::write_features(w, &table))?;
    let evaluation = evaluate_stage(run, args, &corpus, &table, &mut out)?;
    let backtests = backtest_stage(run, &table, &corpus.prices, &mut out)?;
    write_summary(
        &mut out,
        "pipeline",
        &corpus,
        vec![
            ("features", feature_summary),
            ("evaluation", evaluation),
            ("backtest", backtests),
        ],
    )?;
    println!("pipeline finished; reports in {}", out.path().display());
    Ok(())
}

fn simulate(run: &Run, args: &SimulateArgs) -> Result<()> {
    let mut spec: UniverseSpec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing universe spec {}", path.display()))?
        }
        None => UniverseSpec::default(),
    };
    if let Some(t) = args.topics {
        spec.topics = t;
    }
    if !args.alpha.is_empty() {
        spec.alpha = AlphaSpec::Fixed {
            values: args.alpha.clone(),
        };
    }
    if let Some(u) = args.users {
        spec.users = u;
    }
    if let Some(p) = args.posts_per_topic {
        spec.posts_per_topic = p;
    }
    let seed = run.cli.global.seed;
    let universe = generate_universe(&spec, seed).context("generating synthetic universe")?;

    let spec_json = serde_json::to_value(&spec)?;
    let mut out = run.out("simulate", json!({"universe": spec_json.clone()}))?;
    universe
        .corpus
        .write(out.path())
        .with_context(|| format!("writing corpus to {}", out.path().display()))?;
    out.text("planted_model.json", &universe.planted.to_json(&json!({"seed": seed})))?;
    out.json("universe_spec.json", &spec_json)?;
    println!(
        "wrote {} topics, {} users, {} posts to {}",
        universe.corpus.topics.len(),
        universe.corpus.profiles.len(),
        universe.corpus.posts.len(),
        out.path().display()
    );
    Ok(())
}
