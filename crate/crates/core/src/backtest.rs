//! Threshold portfolios: buy a fixed dollar amount of every topic whose
//! feature is at least the threshold, one month after creation, and sell
//! after a fixed holding time.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::analytics::{horizon_date, reference_date, MissingPrice, PriceSeries};
use crate::error::AnalyticsError;
use crate::features::{FeatureName, FeatureTable};

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    pub feature: FeatureName,
    /// Invest iff feature >= threshold.
    pub threshold: f64,
    pub holding_months: u32,
    /// Set only for historical backtests.
    pub investment_date: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    pub topic_id: String,
    pub buy_date: NaiveDate,
    pub sell_date: NaiveDate,
    pub percent_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub spec: StrategySpec,
    pub trades: Vec<Trade>,
    /// Mean trade return; `None` for an empty portfolio.
    pub portfolio_return: Option<f64>,
    /// Qualifying topics that could not be traded, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Value at rank `ceil(q * n / 100)` of the sorted sample (1-based, at least 1).
pub fn nearest_rank(sorted: &[f64], percentile: u32) -> f64 {
    let n = sorted.len();
    let rank = ((percentile as usize * n).div_ceil(100)).clamp(1, n);
    sorted[rank - 1]
}

/// `[0, Q25, Q50, Q75, Q100]` by the nearest-rank rule; 0 is the baseline
/// that admits every topic.
pub fn quartile_thresholds(values: &[f64]) -> Result<[f64; 5], AnalyticsError> {
    if values.len() < 4 {
        return Err(AnalyticsError::TooFew {
            needed: 4,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(AnalyticsError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok([
        0.0,
        nearest_rank(&sorted, 25),
        nearest_rank(&sorted, 50),
        nearest_rank(&sorted, 75),
        nearest_rank(&sorted, 100),
    ])
}

fn trade_topics(
    features: &FeatureTable,
    prices: &BTreeMap<String, PriceSeries>,
    spec: &StrategySpec,
    universe: impl Fn(NaiveDate) -> bool,
) -> BacktestResult {
    let mut trades = Vec::new();
    let mut skipped = Vec::new();
    for (topic_id, row) in &features.rows {
        if !universe(row.creation_date) {
            continue;
        }
        let Some(value) = row.value(spec.feature) else {
            continue;
        };
        if value < spec.threshold {
            continue;
        }
        let buy_date = reference_date(row.creation_date);
        let sell_date = horizon_date(buy_date, spec.holding_months);
        let Some(series) = prices.get(topic_id) else {
            skipped.push((topic_id.clone(), "no price series".to_string()));
            continue;
        };
        match series.period_return(buy_date, sell_date) {
            Ok(percent_return) => trades.push(Trade {
                topic_id: topic_id.clone(),
                buy_date,
                sell_date,
                percent_return,
            }),
            Err(MissingPrice::Buy) => skipped.push((topic_id.clone(), "no buy price".to_string())),
            Err(MissingPrice::Sell) => skipped.push((topic_id.clone(), "no sell price".to_string())),
        }
    }
    let portfolio_return =
        (!trades.is_empty()).then(|| trades.iter().map(|t| t.percent_return).sum::<f64>() / trades.len() as f64);
    BacktestResult {
        spec: spec.clone(),
        trades,
        portfolio_return,
        skipped,
    }
}

fn check_spec(spec: &StrategySpec) -> Result<(), AnalyticsError> {
    if spec.holding_months < 1 {
        return Err(AnalyticsError::InvalidArgument("holding_months must be at least 1".into()));
    }
    if !(spec.threshold.is_finite() && spec.threshold >= 0.0) {
        return Err(AnalyticsError::InvalidArgument(format!(
            "threshold must be finite and non-negative, got {}",
            spec.threshold
        )));
    }
    Ok(())
}

/// Backtest over every topic in the table. Topics without a feature value
/// are not part of the universe; qualifying topics without prices are
/// listed in `skipped`.
pub fn run_threshold_backtest(
    features: &FeatureTable,
    prices: &BTreeMap<String, PriceSeries>,
    spec: &StrategySpec,
) -> Result<BacktestResult, AnalyticsError> {
    check_spec(spec)?;
    if spec.investment_date.is_some() {
        return Err(AnalyticsError::InvalidArgument(
            "investment_date is only meaningful for historical backtests".into(),
        ));
    }
    Ok(trade_topics(features, prices, spec, |_| true))
}

/// Backtest as of `investment_date`: the threshold is the `quantile`
/// percentile (nearest rank) of the feature over topics created before the
/// date, and only topics created after it are traded.
pub fn run_historical_backtest(
    features: &FeatureTable,
    prices: &BTreeMap<String, PriceSeries>,
    feature: FeatureName,
    quantile: u32,
    holding_months: u32,
    investment_date: NaiveDate,
) -> Result<BacktestResult, AnalyticsError> {
    if !matches!(quantile, 25 | 50 | 75 | 100) {
        return Err(AnalyticsError::InvalidArgument(format!(
            "quantile must be one of 25, 50, 75, 100, got {quantile}"
        )));
    }
    let mut earlier: Vec<f64> = features
        .rows
        .values()
        .filter(|r| r.creation_date < investment_date)
        .filter_map(|r| r.value(feature))
        .collect();
    if earlier.len() < 4 {
        return Err(AnalyticsError::ThresholdUnavailable(format!(
            "{} topics with a {feature} value were created before {investment_date}; need at least 4",
            earlier.len()
        )));
    }
    earlier.sort_by(f64::total_cmp);
    let spec = StrategySpec {
        feature,
        threshold: nearest_rank(&earlier, quantile),
        holding_months,
        investment_date: Some(investment_date),
    };
    check_spec(&spec)?;
    Ok(trade_topics(features, prices, &spec, |created| created > investment_date))
}

/// Features left out of a grid, with the reason.
pub type UnavailableFeatures = Vec<(FeatureName, String)>;

/// All features crossed with the quartile thresholds and holding times.
/// Features with fewer than four values are reported in the second list.
pub fn run_quartile_grid(
    features: &FeatureTable,
    prices: &BTreeMap<String, PriceSeries>,
    holding_months: &[u32],
) -> Result<(Vec<BacktestResult>, UnavailableFeatures), AnalyticsError> {
    let mut results = Vec::new();
    let mut unavailable = Vec::new();
    for feature in FeatureName::ALL {
        let values: Vec<f64> = features.values(feature).into_values().collect();
        let thresholds = match quartile_thresholds(&values) {
            Ok(t) => t,
            Err(e) => {
                unavailable.push((feature, e.to_string()));
                continue;
            }
        };
        for &h in holding_months {
            for &threshold in &thresholds {
                let spec = StrategySpec {
                    feature,
                    threshold,
                    holding_months: h,
                    investment_date: None,
                };
                results.push(run_threshold_backtest(features, prices, &spec)?);
            }
        }
    }
    Ok((results, unavailable))
}
