//! Test-only oracles and fixture builders. Nothing here calls into the code
//! path it is used to check.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use engage_core::corpus::{Corpus, DatasetOptions, InteractionDataset, InteractionKindSet, Post, TopicMeta, UserProfile};
use engage_core::analytics::{PricePoint, PriceSeries};
use engage_core::engagement::{log_likelihood, EngagementModel};
use engage_core::features::{EstimationMode, FeatureRow, FeatureTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn day(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

pub fn profile(id: &str, followers: u64) -> UserProfile {
    UserProfile {
        user_id: id.to_string(),
        follower_count: followers,
        bot_probability: None,
    }
}

/// Two topics, kinds (like = reference, retweet).
/// A: one user with 1000 followers, 10 posts, 40 likes and 12 retweets in total.
/// B: one user with 500 followers, 4 posts, 5 likes and 3 retweets.
pub fn two_topic_corpus() -> Corpus {
    let kinds = InteractionKindSet::new(&["like", "retweet"], "like").unwrap();
    let start = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
    let mut posts = Vec::new();
    // 40 likes / 12 retweets over 10 posts
    let a_likes = [4, 4, 4, 4, 4, 4, 4, 4, 4, 4];
    let a_rts = [2, 1, 1, 1, 1, 1, 1, 2, 1, 1];
    for i in 0..10 {
        posts.push(Post {
            topic_id: "A".into(),
            user_id: "ua".into(),
            timestamp: start + Duration::hours(i),
            counts: vec![a_likes[i as usize], a_rts[i as usize]],
        });
    }
    let b_likes = [2, 1, 1, 1];
    let b_rts = [1, 1, 0, 1];
    for i in 0..4 {
        posts.push(Post {
            topic_id: "B".into(),
            user_id: "ub".into(),
            timestamp: start + Duration::hours(i),
            counts: vec![b_likes[i as usize], b_rts[i as usize]],
        });
    }
    Corpus {
        kinds,
        topics: vec![TopicMeta::new("A", day("2021-01-01")), TopicMeta::new("B", day("2021-01-01"))],
        profiles: [("ua".to_string(), profile("ua", 1000)), ("ub".to_string(), profile("ub", 500))].into(),
        posts,
        ..Corpus::default()
    }
}

pub fn two_topic_dataset() -> InteractionDataset {
    two_topic_corpus().build_dataset(&DatasetOptions::default()).unwrap()
}

/// Random small dataset: up to 5 topics, 10 users and 3 kinds; every user has
/// at least one follower and the reference kind has at least one interaction.
pub fn random_small_dataset(seed: u64) -> InteractionDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_kinds = rng.random_range(1..=3usize);
    let names: Vec<String> = ["like", "retweet", "reply"][..n_kinds].iter().map(|s| s.to_string()).collect();
    let kinds = InteractionKindSet::new(&names, "like").unwrap();
    let n_topics = rng.random_range(1..=5usize);
    let n_users = rng.random_range(1..=10usize);
    let profiles: BTreeMap<String, UserProfile> = (0..n_users)
        .map(|u| {
            let id = format!("u{u}");
            let f = rng.random_range(1..=2000u64);
            (id.clone(), profile(&id, f))
        })
        .collect();
    let topics: Vec<TopicMeta> = (0..n_topics)
        .map(|t| TopicMeta::new(format!("t{t}"), day("2021-01-01")))
        .collect();
    let start = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
    let mut posts = Vec::new();
    for t in &topics {
        let n_posts = rng.random_range(1..=6usize);
        for k in 0..n_posts {
            let user = format!("u{}", rng.random_range(0..n_users));
            let counts = (0..n_kinds).map(|_| rng.random_range(0..=9u64)).collect();
            posts.push(Post {
                topic_id: t.topic_id.clone(),
                user_id: user,
                timestamp: start + Duration::minutes(k as i64),
                counts,
            });
        }
    }
    if posts.iter().all(|p| p.counts[0] == 0) {
        posts[0].counts[0] = 1;
    }
    Corpus {
        kinds,
        topics,
        profiles,
        posts,
        ..Corpus::default()
    }
    .build_dataset(&DatasetOptions::default())
    .unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

/// Central finite differences of the log-likelihood with respect to every
/// alpha and every non-reference beta, step relative to the parameter. A
/// parameter at zero gets a forward difference instead (the likelihood is
/// linear in it there, since its counts must be zero).
pub fn finite_difference_gradient(
    dataset: &InteractionDataset,
    model: &EngagementModel,
) -> (BTreeMap<String, f64>, BTreeMap<String, f64>) {
    let mut d_alpha = BTreeMap::new();
    for (topic, &a) in &model.alpha {
        let (h, lo) = if a == 0.0 { (1e-6, 0.0) } else { (1e-5 * a, a - 1e-5 * a) };
        let mut plus = model.clone();
        let mut minus = model.clone();
        plus.alpha.insert(topic.clone(), a + h);
        minus.alpha.insert(topic.clone(), lo);
        let g = (log_likelihood(dataset, &plus).unwrap() - log_likelihood(dataset, &minus).unwrap()) / (a + h - lo);
        d_alpha.insert(topic.clone(), g);
    }
    let mut d_beta = BTreeMap::new();
    for (i, name) in model.kinds.names().iter().enumerate() {
        if i == model.kinds.reference() {
            continue;
        }
        let b = model.beta[i];
        let (h, lo) = if b == 0.0 { (1e-6, 0.0) } else { (1e-5 * b, b - 1e-5 * b) };
        let mut plus = model.clone();
        let mut minus = model.clone();
        plus.beta[i] = b + h;
        minus.beta[i] = lo;
        let g = (log_likelihood(dataset, &plus).unwrap() - log_likelihood(dataset, &minus).unwrap()) / (b + h - lo);
        d_beta.insert(name.clone(), g);
    }
    (d_alpha, d_beta)
}

/// Area under ROC by counting every (positive, negative) pair.
pub fn brute_force_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0u64;
    let mut ties = 0u64;
    let mut pairs = 0u64;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                wins += 1;
            } else if scores[i] == scores[j] {
                ties += 1;
            }
        }
    }
    (2 * wins + ties) as f64 / (2 * pairs) as f64
}

/// Spearman rho with each rank taken from its definition:
/// 1 + #smaller + (#equal others) / 2.
pub fn naive_spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, x)| {
                let smaller = v.iter().filter(|y| *y < x).count() as f64;
                let equal = v.iter().enumerate().filter(|(j, y)| *j != i && *y == x).count() as f64;
                1.0 + smaller + equal / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(xs), rank(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Optimal 1-D k-means inertia by dynamic programming over contiguous
/// partitions of the sorted values.
pub fn optimal_kmeans_inertia(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let cost = |i: usize, j: usize| -> f64 {
        // inclusive segment i..=j
        let seg = &v[i..=j];
        let m = seg.iter().sum::<f64>() / seg.len() as f64;
        seg.iter().map(|x| (x - m).powi(2)).sum()
    };
    let mut dp = vec![vec![f64::INFINITY; n + 1]; k + 1];
    dp[0][0] = 0.0;
    for c in 1..=k {
        for end in 1..=n {
            for start in (c - 1)..end {
                let prev = dp[c - 1][start];
                if prev.is_finite() {
                    dp[c][end] = dp[c][end].min(prev + cost(start, end - 1));
                }
            }
        }
    }
    dp[k][n]
}

pub fn feature_row(topic: &str, created: NaiveDate, engagement: Option<f64>) -> FeatureRow {
    FeatureRow {
        topic_id: topic.to_string(),
        creation_date: created,
        engagement_coefficient: engagement,
        engagement_note: None,
        tweet_volume: 0,
        mean_bot_probability: None,
        estimation_mode: EstimationMode::InSample,
    }
}

pub fn feature_table(rows: Vec<FeatureRow>) -> FeatureTable {
    FeatureTable {
        mode: EstimationMode::InSample,
        rows: rows.into_iter().map(|r| (r.topic_id.clone(), r)).collect(),
    }
}

/// Daily prices from `start` for `days` days, growing geometrically by
/// `daily` (a fraction) per day.
pub fn geometric_prices(topic: &str, start: NaiveDate, p0: f64, daily: f64, days: i64) -> PriceSeries {
    let points = (0..days)
        .map(|d| PricePoint {
            date: start + Duration::days(d),
            price: p0 * (1.0 + daily).powi(d as i32),
        })
        .collect();
    PriceSeries::new(topic, points).unwrap()
}

/// Daily prices equal to `p_buy` on the buy date and `p_sell` on each of the
/// following `days_after` days.
pub fn step_prices(topic: &str, buy: NaiveDate, p_buy: f64, p_sell: f64, days_after: i64) -> PriceSeries {
    let points = (0..=days_after)
        .map(|d| PricePoint {
            date: buy + Duration::days(d),
            price: if d == 0 { p_buy } else { p_sell },
        })
        .collect();
    PriceSeries::new(topic, points).unwrap()
}
