//! Seeded synthetic universes: topics with planted engagement coefficients,
//! a user population, posts drawn from the engagement model and daily
//! prices whose returns follow a chosen link to the planted coefficients.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analytics::{PricePoint, PriceSeries};
use crate::corpus::{Corpus, InteractionKindSet, TopicMeta, UserProfile, MONTH_DAYS};
use crate::engagement::{sample_posts, EngagementModel, PlanEntry, SamplingPlan};
use crate::error::EstimationError;

// Independent ChaCha streams derived from the one seed. Stream 0 belongs to
// the interaction-count sampler.
const USER_STREAM: u64 = 1;
const ALPHA_STREAM: u64 = 2;
const PLAN_STREAM: u64 = 3;
const PRICE_STREAM: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSpec {
    /// One value per topic; a single value is repeated for every topic.
    Fixed { values: Vec<f64> },
    /// Geometric grid from `min` to `max`.
    LogSpaced { min: f64, max: f64 },
    /// Independent log-uniform draws.
    LogUniform { min: f64, max: f64 },
}

/// How daily prices relate to the planted coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReturnLink {
    /// Deterministic exponential drift whose monthly return rises strictly
    /// with log(alpha) from `min_monthly` to `max_monthly` (fractions, e.g. -0.2).
    MonotoneInAlpha { min_monthly: f64, max_monthly: f64 },
    /// Gaussian log-price random walk, unrelated to alpha.
    RandomWalk { monthly_drift: f64, daily_volatility: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UniverseSpec {
    pub topics: usize,
    pub alpha: AlphaSpec,
    pub kinds: Vec<String>,
    pub reference_kind: String,
    pub beta: Vec<f64>,
    pub users: usize,
    /// Follower counts are log-uniform on `[follower_min, follower_max]`.
    pub follower_min: u64,
    pub follower_max: u64,
    pub posts_per_topic: u64,
    pub first_creation: NaiveDate,
    pub creation_spacing_days: i64,
    /// Per-user bot probability drawn uniformly from this range; `None` leaves it unknown.
    pub bot_probability: Option<(f64, f64)>,
    pub return_link: ReturnLink,
    pub initial_price: f64,
    /// Prices cover creation through this many months after the reference date.
    pub price_months: u32,
}

impl Default for UniverseSpec {
    fn default() -> Self {
        Self {
            topics: 5,
            alpha: AlphaSpec::LogSpaced { min: 1e-5, max: 1e-3 },
            kinds: vec!["like".into(), "retweet".into(), "reply".into()],
            reference_kind: "like".into(),
            beta: vec![1.0, 0.31, 0.19],
            users: 1000,
            follower_min: 100,
            follower_max: 100_000,
            posts_per_topic: 10_000,
            first_creation: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            creation_spacing_days: 14,
            bot_probability: Some((0.2, 0.6)),
            return_link: ReturnLink::MonotoneInAlpha {
                min_monthly: -0.3,
                max_monthly: 0.5,
            },
            initial_price: 1.0,
            price_months: 12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticUniverse {
    pub corpus: Corpus,
    pub planted: EngagementModel,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn log_uniform(rng: &mut ChaCha8Rng, min: f64, max: f64) -> f64 {
    if min == max {
        return min;
    }
    (min.ln() + rng.random::<f64>() * (max.ln() - min.ln())).exp()
}

fn invalid(msg: impl Into<String>) -> EstimationError {
    EstimationError::InvalidSpec(msg.into())
}

impl UniverseSpec {
    pub fn validate(&self) -> Result<(), EstimationError> {
        if self.topics == 0 || self.users == 0 {
            return Err(invalid("need at least one topic and one user"));
        }
        if self.kinds.len() != self.beta.len() {
            return Err(invalid("kinds and beta differ in length"));
        }
        if self.follower_min > self.follower_max || (self.follower_min == 0 && self.follower_max > 0) {
            return Err(invalid("follower range must satisfy 0 < min <= max (or both 0)"));
        }
        if self.creation_spacing_days < 0 {
            return Err(invalid("creation_spacing_days must be non-negative"));
        }
        if !(self.initial_price.is_finite() && self.initial_price > 0.0) {
            return Err(invalid("initial_price must be positive"));
        }
        match &self.alpha {
            AlphaSpec::Fixed { values } => {
                if values.len() != 1 && values.len() != self.topics {
                    return Err(invalid("alpha needs one value or one per topic"));
                }
                if values.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                    return Err(invalid("alpha values must be non-negative"));
                }
            }
            AlphaSpec::LogSpaced { min, max } | AlphaSpec::LogUniform { min, max } => {
                if !(*min > 0.0 && min <= max && max.is_finite()) {
                    return Err(invalid("alpha range must satisfy 0 < min <= max"));
                }
            }
        }
        if let Some((lo, hi)) = self.bot_probability {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(invalid("bot probability range must lie in [0, 1]"));
            }
        }
        if let ReturnLink::MonotoneInAlpha { min_monthly, max_monthly } = self.return_link {
            if min_monthly <= -1.0 || max_monthly <= -1.0 || min_monthly > max_monthly {
                return Err(invalid("monthly returns must exceed -100% and be ordered"));
            }
        }
        Ok(())
    }

    fn topic_ids(&self) -> Vec<String> {
        let width = self.topics.to_string().len().max(2);
        (1..=self.topics).map(|i| format!("T{i:0width$}")).collect()
    }

    fn alphas(&self, seed: u64) -> Vec<f64> {
        match &self.alpha {
            AlphaSpec::Fixed { values } if values.len() == 1 => vec![values[0]; self.topics],
            AlphaSpec::Fixed { values } => values.clone(),
            AlphaSpec::LogSpaced { min, max } => {
                if self.topics == 1 {
                    return vec![*min];
                }
                let step = (max.ln() - min.ln()) / (self.topics - 1) as f64;
                (0..self.topics).map(|i| (min.ln() + step * i as f64).exp()).collect()
            }
            AlphaSpec::LogUniform { min, max } => {
                let mut rng = rng_for(seed, ALPHA_STREAM);
                (0..self.topics).map(|_| log_uniform(&mut rng, *min, *max)).collect()
            }
        }
    }
}

/// Build a universe from `spec`; every random choice derives from `seed`.
pub fn generate_universe(spec: &UniverseSpec, seed: u64) -> Result<SyntheticUniverse, EstimationError> {
    spec.validate()?;
    let kinds = InteractionKindSet::new(&spec.kinds, &spec.reference_kind).map_err(|e| invalid(e.to_string()))?;

    let topic_ids = spec.topic_ids();
    let alphas = spec.alphas(seed);
    let topics: Vec<TopicMeta> = topic_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            TopicMeta::new(
                id.clone(),
                spec.first_creation + Duration::days(spec.creation_spacing_days * i as i64),
            )
        })
        .collect();

    let mut rng = rng_for(seed, USER_STREAM);
    let width = spec.users.to_string().len().max(4);
    let profiles: Vec<UserProfile> = (1..=spec.users)
        .map(|i| {
            let follower_count = if spec.follower_max == 0 {
                0
            } else {
                log_uniform(&mut rng, spec.follower_min as f64, spec.follower_max as f64).round() as u64
            };
            let bot_probability = spec.bot_probability.map(|(lo, hi)| lo + rng.random::<f64>() * (hi - lo));
            UserProfile {
                user_id: format!("u{i:0width$}"),
                follower_count,
                bot_probability,
            }
        })
        .collect();

    let mut rng = rng_for(seed, PLAN_STREAM);
    let mut entries = Vec::new();
    for id in &topic_ids {
        let mut per_user: BTreeMap<usize, u64> = BTreeMap::new();
        for _ in 0..spec.posts_per_topic {
            *per_user.entry(rng.random_range(0..spec.users)).or_default() += 1;
        }
        entries.extend(per_user.into_iter().map(|(u, posts)| PlanEntry {
            topic_id: id.clone(),
            user_id: profiles[u].user_id.clone(),
            posts,
        }));
    }
    let plan = SamplingPlan {
        topics: topics.clone(),
        entries,
    };

    let alpha_map: BTreeMap<String, f64> = topic_ids.iter().cloned().zip(alphas.iter().copied()).collect();
    let mut beta = spec.beta.clone();
    beta[kinds.reference()] = 1.0;
    let planted = EngagementModel::new(kinds.clone(), alpha_map, beta)?;
    let posts = sample_posts(&planted, &profiles, &plan, seed)?;

    let prices = price_paths(spec, &topics, &alphas, seed);
    let corpus = Corpus {
        kinds,
        topics,
        profiles: profiles.into_iter().map(|p| (p.user_id.clone(), p)).collect(),
        posts,
        prices,
        warnings: Vec::new(),
    };
    Ok(SyntheticUniverse { corpus, planted })
}

fn price_paths(spec: &UniverseSpec, topics: &[TopicMeta], alphas: &[f64], seed: u64) -> BTreeMap<String, PriceSeries> {
    let days = MONTH_DAYS * (spec.price_months as i64 + 1);
    let mut out = BTreeMap::new();
    match &spec.return_link {
        ReturnLink::MonotoneInAlpha { min_monthly, max_monthly } => {
            let logs: Vec<f64> = alphas.iter().map(|a| a.max(f64::MIN_POSITIVE).ln()).collect();
            let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (g_lo, g_hi) = ((1.0 + min_monthly).ln(), (1.0 + max_monthly).ln());
            for (topic, log_alpha) in topics.iter().zip(&logs) {
                let position = if hi > lo { (log_alpha - lo) / (hi - lo) } else { 0.5 };
                let monthly_log_growth = g_lo + position * (g_hi - g_lo);
                let observations = (0..=days)
                    .map(|d| PricePoint {
                        date: topic.creation_date + Duration::days(d),
                        price: spec.initial_price * (monthly_log_growth * d as f64 / MONTH_DAYS as f64).exp(),
                    })
                    .collect();
                let series = PriceSeries::new(topic.topic_id.clone(), observations).expect("increasing dates");
                out.insert(topic.topic_id.clone(), series);
            }
        }
        ReturnLink::RandomWalk {
            monthly_drift,
            daily_volatility,
        } => {
            let mut rng = rng_for(seed, PRICE_STREAM);
            let step = Normal::new(monthly_drift / MONTH_DAYS as f64, daily_volatility.max(0.0)).expect("finite");
            for topic in topics {
                let mut log_price = spec.initial_price.ln();
                let observations = (0..=days)
                    .map(|d| {
                        if d > 0 {
                            log_price += step.sample(&mut rng);
                        }
                        PricePoint {
                            date: topic.creation_date + Duration::days(d),
                            price: log_price.exp(),
                        }
                    })
                    .collect();
                let series = PriceSeries::new(topic.topic_id.clone(), observations).expect("increasing dates");
                out.insert(topic.topic_id.clone(), series);
            }
        }
    }
    out
}
