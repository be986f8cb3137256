//! CSV report writers. Missing values are written as empty cells.

use std::io::Write;

use crate::analytics::{ClusterReturnCell, DependenceCell, ReturnMatrix};
use crate::backtest::BacktestResult;
use crate::features::FeatureTable;

fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_features<W: Write>(out: W, table: &FeatureTable) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "topic_id",
        "creation_date",
        "engagement_coefficient",
        "tweet_volume",
        "mean_bot_probability",
        "estimation_mode",
        "manipulation_flag",
    ])?;
    for row in table.rows.values() {
        w.write_record([
            row.topic_id.clone(),
            row.creation_date.to_string(),
            num(row.engagement_coefficient),
            row.tweet_volume.to_string(),
            num(row.mean_bot_probability),
            row.estimation_mode.to_string(),
            row.manipulation_flag().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_returns<W: Write>(out: W, returns: &ReturnMatrix) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["topic_id", "horizon_months", "percent_return"])?;
    for (topic, cells) in &returns.rows {
        for (h, r) in returns.horizons.iter().zip(cells) {
            w.write_record([topic.clone(), h.to_string(), num(*r)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_dependence<W: Write>(out: W, cells: &[DependenceCell]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "horizon_months", "abs_spearman", "auc", "n_topics"])?;
    for c in cells {
        w.write_record([
            c.feature.to_string(),
            c.horizon_months.to_string(),
            num(c.abs_spearman),
            num(c.auc),
            c.n_topics.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cluster_returns<W: Write>(out: W, cells: &[ClusterReturnCell]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cluster", "center", "horizon_months", "median_return", "n_topics"])?;
    for c in cells {
        w.write_record([
            c.cluster.to_string(),
            c.center.to_string(),
            c.horizon_months.to_string(),
            num(c.median_return),
            c.n_topics.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_backtests<W: Write>(out: W, results: &[BacktestResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "feature",
        "threshold",
        "holding_months",
        "investment_date",
        "portfolio_return",
        "n_traded",
        "n_skipped",
    ])?;
    for r in results {
        w.write_record([
            r.spec.feature.to_string(),
            r.spec.threshold.to_string(),
            r.spec.holding_months.to_string(),
            r.spec.investment_date.map(|d| d.to_string()).unwrap_or_default(),
            num(r.portfolio_return),
            r.trades.len().to_string(),
            r.skipped.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trades<W: Write>(out: W, results: &[BacktestResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "feature",
        "threshold",
        "holding_months",
        "investment_date",
        "topic_id",
        "buy_date",
        "sell_date",
        "percent_return",
    ])?;
    for r in results {
        let date = r.spec.investment_date.map(|d| d.to_string()).unwrap_or_default();
        for t in &r.trades {
            w.write_record([
                r.spec.feature.to_string(),
                r.spec.threshold.to_string(),
                r.spec.holding_months.to_string(),
                date.clone(),
                t.topic_id.clone(),
                t.buy_date.to_string(),
                t.sell_date.to_string(),
                t.percent_return.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
