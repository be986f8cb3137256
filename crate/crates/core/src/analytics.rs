//! Return computation and dependence metrics between features and returns.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::corpus::{TopicMeta, MONTH_DAYS};
use crate::error::AnalyticsError;
use crate::features::{BotClustering, FeatureName, FeatureTable};

/// How far back a price lookup may reach when the target date has no observation.
pub const PRICE_LOOKBACK_DAYS: i64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub price: f64,
}

/// Daily prices of one topic, dates strictly increasing, prices positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    topic_id: String,
    observations: Vec<PricePoint>,
}

impl PriceSeries {
    pub fn new(topic_id: impl Into<String>, observations: Vec<PricePoint>) -> Result<Self, AnalyticsError> {
        for pair in observations.windows(2) {
            if pair[1].date <= pair[0].date {
                return Err(AnalyticsError::InvalidArgument(format!(
                    "price dates must be strictly increasing ({} then {})",
                    pair[0].date, pair[1].date
                )));
            }
        }
        if observations.iter().any(|p| !(p.price.is_finite() && p.price > 0.0)) {
            return Err(AnalyticsError::InvalidArgument("prices must be positive".into()));
        }
        Ok(Self {
            topic_id: topic_id.into(),
            observations,
        })
    }

    pub fn topic_id(&self) -> &str {
        &self.topic_id
    }

    pub fn observations(&self) -> &[PricePoint] {
        &self.observations
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Last observation on or before `date`, at most [`PRICE_LOOKBACK_DAYS`] earlier.
    pub fn price_at(&self, date: NaiveDate) -> Option<f64> {
        let idx = self.observations.partition_point(|p| p.date <= date);
        let obs = self.observations.get(idx.checked_sub(1)?)?;
        (date - obs.date <= Duration::days(PRICE_LOOKBACK_DAYS)).then_some(obs.price)
    }

    /// Percent return between two dates, or which end could not be priced.
    pub fn period_return(&self, buy: NaiveDate, sell: NaiveDate) -> Result<f64, MissingPrice> {
        let p_buy = self.price_at(buy).ok_or(MissingPrice::Buy)?;
        let p_sell = self.price_at(sell).ok_or(MissingPrice::Sell)?;
        Ok((p_sell - p_buy) * 100.0 / p_buy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingPrice {
    Buy,
    Sell,
}

/// Creation date plus one month: the end of the observation window.
pub fn reference_date(creation_date: NaiveDate) -> NaiveDate {
    creation_date + Duration::days(MONTH_DAYS)
}

pub fn horizon_date(reference: NaiveDate, horizon_months: u32) -> NaiveDate {
    reference + Duration::days(MONTH_DAYS * horizon_months as i64)
}

/// Percent return from one month after creation to `horizon_months` months later.
pub fn compute_return(series: &PriceSeries, creation_date: NaiveDate, horizon_months: u32) -> Option<f64> {
    let reference = reference_date(creation_date);
    series
        .period_return(reference, horizon_date(reference, horizon_months))
        .ok()
}

/// Returns per topic and horizon; `None` where a price is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    pub horizons: Vec<u32>,
    pub rows: BTreeMap<String, Vec<Option<f64>>>,
}

impl ReturnMatrix {
    pub fn compute<'a>(
        topics: impl IntoIterator<Item = &'a TopicMeta>,
        prices: &BTreeMap<String, PriceSeries>,
        horizons: &[u32],
    ) -> Self {
        let rows = topics
            .into_iter()
            .map(|t| {
                let cells = horizons
                    .iter()
                    .map(|&h| prices.get(&t.topic_id).and_then(|s| compute_return(s, t.creation_date, h)))
                    .collect();
                (t.topic_id.clone(), cells)
            })
            .collect();
        Self {
            horizons: horizons.to_vec(),
            rows,
        }
    }

    pub fn get(&self, topic_id: &str, horizon: u32) -> Option<f64> {
        let col = self.horizons.iter().position(|&h| h == horizon)?;
        self.rows.get(topic_id)?.get(col).copied().flatten()
    }
}

/// 1-based ranks with ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank ((i + 1) + j) / 2
        let rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

/// Spearman's rank correlation: the Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, AnalyticsError> {
    if xs.len() != ys.len() {
        return Err(AnalyticsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(AnalyticsError::TooFew {
            needed: 2,
            got: xs.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(AnalyticsError::NonFinite);
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalyticsError::ConstantInput);
    }
    // Centered ranks are multiples of 1/2, so the sums are exact for any
    // realistic n and identical rankings give exactly +-1.
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Area under the ROC curve, `P(s_pos > s_neg) + P(tie) / 2`.
///
/// Computed from the Mann-Whitney statistic with average ranks. Twice the
/// rank sums are integers, so the result is one correctly rounded division
/// of exact integers.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, AnalyticsError> {
    if scores.len() != labels.len() {
        return Err(AnalyticsError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(AnalyticsError::NonFinite);
    }
    let positives = labels.iter().filter(|&&l| l).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(AnalyticsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut doubled_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let doubled_rank = (i + 1 + j) as u64;
        let pos_in_group = order[i..j].iter().filter(|&&idx| labels[idx]).count() as u64;
        doubled_rank_sum += doubled_rank * pos_in_group;
        i = j;
    }
    let doubled_u = doubled_rank_sum - positives * (positives + 1);
    Ok(doubled_u as f64 / (2 * positives * negatives) as f64)
}

/// |rho| and AUC of one feature at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceCell {
    pub feature: FeatureName,
    pub horizon_months: u32,
    /// `None` when fewer than two usable topics or a constant input.
    pub abs_spearman: Option<f64>,
    /// `None` when fewer than two usable topics or a single return sign.
    pub auc: Option<f64>,
    pub n_topics: usize,
}

/// Feature-versus-return dependence for every feature and horizon.
///
/// A topic enters a cell only if both its feature value and its return are
/// defined. The AUC label is 1 iff the return is strictly positive.
pub fn dependence_curves(features: &FeatureTable, returns: &ReturnMatrix) -> Vec<DependenceCell> {
    let mut cells = Vec::new();
    for feature in FeatureName::ALL {
        for &h in &returns.horizons {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (topic_id, row) in &features.rows {
                if let (Some(x), Some(y)) = (row.value(feature), returns.get(topic_id, h)) {
                    xs.push(x);
                    ys.push(y);
                }
            }
            let usable = xs.len() >= 2;
            let abs_spearman = usable.then(|| spearman(&xs, &ys).ok().map(f64::abs)).flatten();
            let labels: Vec<bool> = ys.iter().map(|&r| r > 0.0).collect();
            let auc = usable.then(|| roc_auc(&xs, &labels).ok()).flatten();
            cells.push(DependenceCell {
                feature,
                horizon_months: h,
                abs_spearman,
                auc,
                n_topics: xs.len(),
            });
        }
    }
    cells
}

/// Median with the even-count rule (mean of the two middle values).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReturnCell {
    pub cluster: usize,
    pub center: f64,
    pub horizon_months: u32,
    pub median_return: Option<f64>,
    pub n_topics: usize,
}

/// Median return per cluster and horizon over topics with a defined return.
pub fn median_cluster_returns(clustering: &BotClustering, returns: &ReturnMatrix) -> Vec<ClusterReturnCell> {
    let mut cells = Vec::new();
    for (cluster, &center) in clustering.centers.iter().enumerate() {
        for &h in &returns.horizons {
            let values: Vec<f64> = clustering
                .assignment
                .iter()
                .filter(|(_, &c)| c == cluster)
                .filter_map(|(t, _)| returns.get(t, h))
                .collect();
            cells.push(ClusterReturnCell {
                cluster,
                center,
                horizon_months: h,
                median_return: median(&values),
                n_topics: values.len(),
            });
        }
    }
    cells
}
