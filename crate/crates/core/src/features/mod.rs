//! Per-topic social-media features computed over each topic's first month.

mod kmeans;

pub use kmeans::{cluster_bot_probabilities, BotClustering, DEFAULT_RESTARTS};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use rayon::prelude::*;

use crate::corpus::{midnight_utc, Corpus, DatasetOptions, TopicMeta};
use crate::engagement::{fit_closed_form, FitReport};
use crate::error::{EstimationError, FeatureError};

/// Engagement coefficients above this are flagged as possible manipulation.
pub const MANIPULATION_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EstimationMode {
    /// One fit over every post in the corpus.
    InSample,
    /// One fit per topic using only posts up to the end of its first month.
    PriorData,
}

impl EstimationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimationMode::InSample => "in_sample",
            EstimationMode::PriorData => "prior_data",
        }
    }
}

impl fmt::Display for EstimationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in_sample" | "in-sample" => Ok(Self::InSample),
            "prior_data" | "prior-data" => Ok(Self::PriorData),
            other => Err(format!("unknown estimation mode `{other}` (expected in_sample or prior_data)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureName {
    Engagement,
    Volume,
    BotProbability,
}

impl FeatureName {
    pub const ALL: [FeatureName; 3] = [FeatureName::Engagement, FeatureName::Volume, FeatureName::BotProbability];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureName::Engagement => "engagement",
            FeatureName::Volume => "volume",
            FeatureName::BotProbability => "bot_probability",
        }
    }
}

impl fmt::Display for FeatureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "engagement" => Ok(Self::Engagement),
            "volume" => Ok(Self::Volume),
            "bot_probability" | "bot" => Ok(Self::BotProbability),
            other => Err(format!("unknown feature `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub topic_id: String,
    pub creation_date: NaiveDate,
    /// `None` when the fit produced no estimate; see `engagement_note`.
    pub engagement_coefficient: Option<f64>,
    pub engagement_note: Option<String>,
    pub tweet_volume: u64,
    pub mean_bot_probability: Option<f64>,
    pub estimation_mode: EstimationMode,
}

impl FeatureRow {
    pub fn value(&self, feature: FeatureName) -> Option<f64> {
        match feature {
            FeatureName::Engagement => self.engagement_coefficient,
            FeatureName::Volume => Some(self.tweet_volume as f64),
            FeatureName::BotProbability => self.mean_bot_probability,
        }
    }

    /// Informational only.
    pub fn manipulation_flag(&self) -> bool {
        self.engagement_coefficient.is_some_and(|a| a > MANIPULATION_THRESHOLD)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub mode: EstimationMode,
    pub rows: BTreeMap<String, FeatureRow>,
}

impl FeatureTable {
    pub fn values(&self, feature: FeatureName) -> BTreeMap<String, f64> {
        self.rows
            .iter()
            .filter_map(|(t, r)| r.value(feature).map(|v| (t.clone(), v)))
            .collect()
    }
}

/// Computes features over a corpus.
#[derive(Debug, Clone, Copy)]
pub struct FeatureBuilder<'a> {
    corpus: &'a Corpus,
    strict_users: bool,
}

impl<'a> FeatureBuilder<'a> {
    pub fn new(corpus: &'a Corpus) -> Self {
        Self {
            corpus,
            strict_users: true,
        }
    }

    pub fn strict_users(mut self, strict: bool) -> Self {
        self.strict_users = strict;
        self
    }

    fn topic(&self, topic_id: &str) -> Result<&'a TopicMeta, FeatureError> {
        self.corpus
            .topic(topic_id)
            .ok_or_else(|| FeatureError::UnknownTopic(topic_id.to_string()))
    }

    /// Dataset options for a prior-data fit of `topic`: posts up to the end of
    /// its first month, from topics whose first month started before then.
    pub fn prior_data_options(&self, topic: &TopicMeta) -> DatasetOptions {
        let (_, cutoff) = topic.first_month_window();
        self.options_for_cutoff(cutoff)
    }

    fn options_for_cutoff(&self, cutoff: DateTime<Utc>) -> DatasetOptions {
        let topics: BTreeSet<String> = self
            .corpus
            .topics
            .iter()
            .filter(|t| midnight_utc(t.creation_date) < cutoff)
            .map(|t| t.topic_id.clone())
            .collect();
        DatasetOptions {
            cutoff: Some(cutoff),
            strict_users: self.strict_users,
            topics: Some(topics),
        }
    }

    fn fit(&self, options: &DatasetOptions) -> Result<Result<FitReport, EstimationError>, FeatureError> {
        let dataset = self.corpus.build_dataset(options)?;
        Ok(fit_closed_form(&dataset))
    }

    fn in_sample_options(&self) -> DatasetOptions {
        DatasetOptions {
            strict_users: self.strict_users,
            ..DatasetOptions::default()
        }
    }

    /// Engagement coefficient of one topic.
    pub fn engagement(&self, topic_id: &str, mode: EstimationMode) -> Result<f64, FeatureError> {
        let topic = self.topic(topic_id)?;
        let options = match mode {
            EstimationMode::InSample => self.in_sample_options(),
            EstimationMode::PriorData => self.prior_data_options(topic),
        };
        alpha_from(&self.fit(&options)?, topic_id)
    }

    /// Posts about the topic inside its first-month window.
    pub fn tweet_volume(&self, topic_id: &str) -> Result<u64, FeatureError> {
        let topic = self.topic(topic_id)?;
        let (start, end) = topic.first_month_window();
        Ok(self
            .corpus
            .posts
            .iter()
            .filter(|p| p.topic_id == topic_id && p.timestamp >= start && p.timestamp < end)
            .count() as u64)
    }

    /// Mean bot probability over distinct in-window posters with a known probability.
    pub fn mean_bot_probability(&self, topic_id: &str) -> Result<Option<f64>, FeatureError> {
        let topic = self.topic(topic_id)?;
        let (start, end) = topic.first_month_window();
        let users: BTreeSet<&str> = self
            .corpus
            .posts
            .iter()
            .filter(|p| p.topic_id == topic_id && p.timestamp >= start && p.timestamp < end)
            .map(|p| p.user_id.as_str())
            .collect();
        let probs: Vec<f64> = users
            .into_iter()
            .filter_map(|u| self.corpus.profiles.get(u)?.bot_probability)
            .collect();
        if probs.is_empty() {
            return Ok(None);
        }
        Ok(Some(probs.iter().sum::<f64>() / probs.len() as f64))
    }

    /// The full feature table. Prior-data mode runs one fit per distinct
    /// cutoff, in parallel.
    pub fn table(&self, mode: EstimationMode) -> Result<FeatureTable, FeatureError> {
        let engagement: BTreeMap<String, Result<f64, String>> = match mode {
            EstimationMode::InSample => {
                let fit = self.fit(&self.in_sample_options())?;
                self.corpus
                    .topics
                    .iter()
                    .map(|t| (t.topic_id.clone(), alpha_from(&fit, &t.topic_id).map_err(note)))
                    .collect()
            }
            EstimationMode::PriorData => {
                let cutoffs: BTreeSet<DateTime<Utc>> =
                    self.corpus.topics.iter().map(|t| t.first_month_window().1).collect();
                let fits: BTreeMap<DateTime<Utc>, Result<FitReport, EstimationError>> = cutoffs
                    .into_par_iter()
                    .map(|c| self.fit(&self.options_for_cutoff(c)).map(|f| (c, f)))
                    .collect::<Result<_, _>>()?;
                self.corpus
                    .topics
                    .iter()
                    .map(|t| {
                        let fit = &fits[&t.first_month_window().1];
                        (t.topic_id.clone(), alpha_from(fit, &t.topic_id).map_err(note))
                    })
                    .collect()
            }
        };

        let mut rows = BTreeMap::new();
        for t in &self.corpus.topics {
            let (engagement_coefficient, engagement_note) = match &engagement[&t.topic_id] {
                Ok(a) => (Some(*a), None),
                Err(reason) => (None, Some(reason.clone())),
            };
            rows.insert(
                t.topic_id.clone(),
                FeatureRow {
                    topic_id: t.topic_id.clone(),
                    creation_date: t.creation_date,
                    engagement_coefficient,
                    engagement_note,
                    tweet_volume: self.tweet_volume(&t.topic_id)?,
                    mean_bot_probability: self.mean_bot_probability(&t.topic_id)?,
                    estimation_mode: mode,
                },
            );
        }
        Ok(FeatureTable { mode, rows })
    }
}

fn note(e: FeatureError) -> String {
    match e {
        FeatureError::NoEstimate { reason, .. } => reason,
        other => other.to_string(),
    }
}

fn alpha_from(fit: &Result<FitReport, EstimationError>, topic_id: &str) -> Result<f64, FeatureError> {
    let no_estimate = |reason: String| FeatureError::NoEstimate {
        topic_id: topic_id.to_string(),
        reason,
    };
    let fit = fit.as_ref().map_err(|e| no_estimate(e.to_string()))?;
    if let Some(a) = fit.model.alpha.get(topic_id) {
        return Ok(*a);
    }
    let reason = fit
        .excluded_topics
        .iter()
        .find(|e| e.topic_id == topic_id)
        .map(|e| e.reason.clone())
        .unwrap_or_else(|| "topic not in fitted data".to_string());
    Err(no_estimate(reason))
}

pub fn engagement_feature(corpus: &Corpus, topic_id: &str, mode: EstimationMode) -> Result<f64, FeatureError> {
    FeatureBuilder::new(corpus).engagement(topic_id, mode)
}

pub fn tweet_volume(corpus: &Corpus, topic_id: &str) -> Result<u64, FeatureError> {
    FeatureBuilder::new(corpus).tweet_volume(topic_id)
}

pub fn mean_bot_probability(corpus: &Corpus, topic_id: &str) -> Result<Option<f64>, FeatureError> {
    FeatureBuilder::new(corpus).mean_bot_probability(topic_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{InteractionKindSet, Post, UserProfile};
    use chrono::{Duration, TimeZone};

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn profile(id: &str, f: u64, bot: Option<f64>) -> (String, UserProfile) {
        (
            id.to_string(),
            UserProfile {
                user_id: id.into(),
                follower_count: f,
                bot_probability: bot,
            },
        )
    }

    fn post_at(topic: &str, user: &str, at: DateTime<Utc>, likes: u64) -> Post {
        Post {
            topic_id: topic.into(),
            user_id: user.into(),
            timestamp: at,
            counts: vec![likes],
        }
    }

    fn single_kind() -> InteractionKindSet {
        InteractionKindSet::new(&["like"], "like").unwrap()
    }

    #[test]
    fn volume_counts_only_window_posts() {
        let start = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
        let mut posts = Vec::new();
        for i in 0..17 {
            posts.push(post_at("A", "u", start + Duration::days(i), 1));
        }
        posts.push(post_at("A", "u", start - Duration::seconds(1), 1));
        posts.push(post_at("A", "u", start + Duration::days(30), 1));
        posts.push(post_at("A", "u", start + Duration::days(45), 1));
        let corpus = Corpus {
            kinds: single_kind(),
            topics: vec![TopicMeta::new("A", day(2021, 1, 1)), TopicMeta::new("B", day(2021, 1, 1))],
            profiles: [profile("u", 10, None)].into(),
            posts,
            ..Corpus::default()
        };
        assert_eq!(tweet_volume(&corpus, "A").unwrap(), 17);
        assert_eq!(tweet_volume(&corpus, "B").unwrap(), 0);
        assert!(matches!(tweet_volume(&corpus, "C"), Err(FeatureError::UnknownTopic(_))));
    }

    #[test]
    fn bot_probability_is_per_user() {
        let start = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
        let mut posts: Vec<Post> = (0..100).map(|_| post_at("A", "heavy", start, 0)).collect();
        posts.push(post_at("A", "light", start, 0));
        posts.push(post_at("B", "x", start, 0));
        posts.push(post_at("B", "y", start, 0));
        let corpus = Corpus {
            kinds: single_kind(),
            topics: vec![
                TopicMeta::new("A", day(2021, 1, 1)),
                TopicMeta::new("B", day(2021, 1, 1)),
                TopicMeta::new("C", day(2021, 1, 1)),
            ],
            profiles: [
                profile("heavy", 10, Some(0.9)),
                profile("light", 10, Some(0.1)),
                profile("x", 10, Some(0.2)),
                profile("y", 10, Some(0.4)),
            ]
            .into(),
            posts,
            ..Corpus::default()
        };
        assert!((mean_bot_probability(&corpus, "A").unwrap().unwrap() - 0.5).abs() < 1e-15);
        assert!((mean_bot_probability(&corpus, "B").unwrap().unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(mean_bot_probability(&corpus, "C").unwrap(), None);
    }

    #[test]
    fn single_topic_modes_agree() {
        let start = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
        let posts = (0..10).map(|i| post_at("A", "u", start + Duration::days(i * 2), i as u64)).collect();
        let corpus = Corpus {
            kinds: single_kind(),
            topics: vec![TopicMeta::new("A", day(2021, 1, 1))],
            profiles: [profile("u", 100, None)].into(),
            posts,
            ..Corpus::default()
        };
        let a = engagement_feature(&corpus, "A", EstimationMode::InSample).unwrap();
        let b = engagement_feature(&corpus, "A", EstimationMode::PriorData).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, 45.0 / 1000.0);
    }

    #[test]
    fn no_estimate_is_not_zero() {
        let start = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
        let corpus = Corpus {
            kinds: single_kind(),
            topics: vec![TopicMeta::new("A", day(2021, 1, 1)), TopicMeta::new("B", day(2021, 1, 1))],
            profiles: [profile("u", 100, None), profile("z", 0, None)].into(),
            posts: vec![post_at("A", "u", start, 3), post_at("B", "z", start, 1)],
            ..Corpus::default()
        };
        let err = engagement_feature(&corpus, "B", EstimationMode::InSample).unwrap_err();
        assert!(matches!(err, FeatureError::NoEstimate { ref reason, .. } if reason == "zero follower exposure"));
        let table = FeatureBuilder::new(&corpus).table(EstimationMode::InSample).unwrap();
        assert_eq!(table.rows["B"].engagement_coefficient, None);
        assert_eq!(table.rows["B"].engagement_note.as_deref(), Some("zero follower exposure"));
        assert_eq!(table.rows["B"].tweet_volume, 1);
    }

    #[test]
    fn manipulation_flag_threshold() {
        let mut row = FeatureRow {
            topic_id: "A".into(),
            creation_date: day(2021, 1, 1),
            engagement_coefficient: Some(2e-3),
            engagement_note: None,
            tweet_volume: 0,
            mean_bot_probability: None,
            estimation_mode: EstimationMode::InSample,
        };
        assert!(row.manipulation_flag());
        row.engagement_coefficient = Some(1e-3);
        assert!(!row.manipulation_flag());
        row.engagement_coefficient = None;
        assert!(!row.manipulation_flag());
    }

    #[test]
    fn mode_and_feature_names_parse() {
        assert_eq!("prior_data".parse::<EstimationMode>().unwrap(), EstimationMode::PriorData);
        assert!("monthly".parse::<EstimationMode>().is_err());
        for f in FeatureName::ALL {
            assert_eq!(f.as_str().parse::<FeatureName>().unwrap(), f);
        }
    }
}
