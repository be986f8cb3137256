use std::collections::BTreeMap;

use chrono::Duration;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::EngagementModel;
use crate::corpus::{
    first_month_window, Corpus, DatasetOptions, InteractionDataset, Post, TopicMeta, UserProfile, MONTH_DAYS,
};
use crate::error::EstimationError;

/// `posts` posts by `user_id` about `topic_id`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanEntry {
    pub topic_id: String,
    pub user_id: String,
    pub posts: u64,
}

/// Which users post how often about which topics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamplingPlan {
    pub topics: Vec<TopicMeta>,
    pub entries: Vec<PlanEntry>,
}

/// Draw posts from the generative model.
///
/// Posts are produced in sorted (topic, user) order and each count is an
/// independent Poisson draw with mean `beta_i * alpha_c * f_u`, consumed in
/// kind order from a single ChaCha8 stream, so a seed fixes the output
/// bit for bit. A topic's posts are spread evenly over its first-month window.
pub fn sample_posts(
    model: &EngagementModel,
    profiles: &[UserProfile],
    plan: &SamplingPlan,
    seed: u64,
) -> Result<Vec<Post>, EstimationError> {
    let followers: BTreeMap<&str, u64> = profiles
        .iter()
        .map(|p| (p.user_id.as_str(), p.follower_count))
        .collect();
    let mut grouped: BTreeMap<&str, BTreeMap<&str, u64>> = BTreeMap::new();
    for e in &plan.entries {
        *grouped
            .entry(e.topic_id.as_str())
            .or_default()
            .entry(e.user_id.as_str())
            .or_default() += e.posts;
    }
    let topics: BTreeMap<&str, &TopicMeta> = plan.topics.iter().map(|t| (t.topic_id.as_str(), t)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut posts = Vec::new();
    for (topic_id, users) in &grouped {
        let topic = topics
            .get(topic_id)
            .ok_or_else(|| EstimationError::MissingParameter(format!("topic metadata for `{topic_id}`")))?;
        let alpha = *model
            .alpha
            .get(*topic_id)
            .ok_or_else(|| EstimationError::MissingParameter(format!("alpha[{topic_id}]")))?;
        let (start, _) = first_month_window(topic);
        let topic_posts: u64 = users.values().sum();
        let window_secs = MONTH_DAYS * 86_400;
        let mut index = 0u64;
        for (user_id, &m) in users {
            let f = *followers
                .get(user_id)
                .ok_or_else(|| EstimationError::MissingParameter(format!("profile of `{user_id}`")))?;
            for _ in 0..m {
                let offset = (index as i128 * window_secs as i128 / topic_posts as i128) as i64;
                index += 1;
                let counts = model
                    .beta
                    .iter()
                    .map(|b| draw_poisson(&mut rng, b * alpha * f as f64))
                    .collect();
                posts.push(Post {
                    topic_id: topic_id.to_string(),
                    user_id: user_id.to_string(),
                    timestamp: start + Duration::seconds(offset),
                    counts,
                });
            }
        }
    }
    Ok(posts)
}

/// [`sample_posts`] packaged as a dataset over the plan's topics and the given profiles.
pub fn sample_synthetic(
    model: &EngagementModel,
    profiles: &[UserProfile],
    plan: &SamplingPlan,
    seed: u64,
) -> Result<InteractionDataset, EstimationError> {
    let posts = sample_posts(model, profiles, plan, seed)?;
    let corpus = Corpus {
        kinds: model.kinds.clone(),
        topics: plan.topics.clone(),
        profiles: profiles.iter().map(|p| (p.user_id.clone(), p.clone())).collect(),
        posts,
        ..Corpus::default()
    };
    corpus
        .build_dataset(&DatasetOptions::default())
        .map_err(|e| EstimationError::ModelFormat(e.to_string()))
}

fn draw_poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    dist.sample(rng) as u64
}
