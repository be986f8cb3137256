mod common;

use std::collections::{BTreeMap, BTreeSet};

use chrono::Duration;
use common::{brute_force_auc, day, feature_row, feature_table, geometric_prices, naive_spearman, step_prices};
use engage_core::analytics::{
    compute_return, dependence_curves, median_cluster_returns, reference_date, roc_auc, spearman, PricePoint,
    PriceSeries, ReturnMatrix,
};
use engage_core::backtest::{quartile_thresholds, run_historical_backtest, run_threshold_backtest, StrategySpec};
use engage_core::corpus::TopicMeta;
use engage_core::error::AnalyticsError;
use engage_core::features::{cluster_bot_probabilities, FeatureName};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn auc_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(2..=12usize);
        // small integer scores so that ties are common
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            assert!(matches!(roc_auc(&scores, &labels), Err(AnalyticsError::SingleClass)));
            continue;
        }
        assert_eq!(roc_auc(&scores, &labels).unwrap(), brute_force_auc(&scores, &labels));
        checked += 1;
    }
}

#[test]
fn spearman_matches_rank_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(2..=15usize);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-3..3) as f64 * 0.5).collect();
        let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
        if constant(&xs) || constant(&ys) {
            assert!(matches!(spearman(&xs, &ys), Err(AnalyticsError::ConstantInput)));
            continue;
        }
        let got = spearman(&xs, &ys).unwrap();
        let want = naive_spearman(&xs, &ys);
        assert!((got - want).abs() <= 1e-12, "{xs:?} {ys:?}: {got} vs {want}");
        checked += 1;
    }
}

#[test]
fn small_examples_against_oracles() {
    let xs = [1.0, 2.0, 2.0, 3.0];
    let ys = [1.0, 3.0, 2.0, 4.0];
    assert!((spearman(&xs, &ys).unwrap() - naive_spearman(&xs, &ys)).abs() < 1e-12);
    let scores = [0.1, 0.4, 0.35, 0.8];
    let labels = [false, false, true, true];
    assert_eq!(roc_auc(&scores, &labels).unwrap(), brute_force_auc(&scores, &labels));
    assert_eq!(roc_auc(&scores, &labels).unwrap(), 0.75);
}

#[test]
fn lookback_return() {
    let created = day("2021-01-01");
    let reference = reference_date(created);
    let target = reference + Duration::days(30);
    let series = PriceSeries::new(
        "X",
        vec![
            PricePoint {
                date: reference,
                price: 100.0,
            },
            PricePoint {
                date: target - Duration::days(3),
                price: 80.0,
            },
        ],
    )
    .unwrap();
    assert_eq!(compute_return(&series, created, 1), Some(-20.0));
    // more than a week stale is missing
    assert_eq!(compute_return(&series, created, 2), None);
}

/// 12 topics whose daily growth increases with engagement, half losing money.
fn monotone_universe() -> (Vec<TopicMeta>, BTreeMap<String, PriceSeries>, Vec<f64>) {
    let mut topics = Vec::new();
    let mut prices = BTreeMap::new();
    let mut engagement = Vec::new();
    for i in 0..12 {
        let id = format!("T{i:02}");
        let created = day("2021-01-01") + Duration::days(9 * i);
        let growth = -0.006 + 0.001 * i as f64;
        topics.push(TopicMeta::new(id.clone(), created));
        prices.insert(id.clone(), geometric_prices(&id, created, 1.0, growth, 420));
        engagement.push(1e-5 * (1.5f64).powi(i as i32));
    }
    (topics, prices, engagement)
}

#[test]
fn monotone_construction_gives_perfect_dependence() {
    let (topics, prices, engagement) = monotone_universe();
    let horizons: Vec<u32> = (1..=12).collect();
    let returns = ReturnMatrix::compute(&topics, &prices, &horizons);
    let table = feature_table(
        topics
            .iter()
            .zip(&engagement)
            .map(|(t, a)| feature_row(&t.topic_id, t.creation_date, Some(*a)))
            .collect(),
    );
    let cells = dependence_curves(&table, &returns);
    let engagement_cells: Vec<_> = cells.iter().filter(|c| c.feature == FeatureName::Engagement).collect();
    assert_eq!(engagement_cells.len(), 12);
    for c in engagement_cells {
        assert_eq!(c.n_topics, 12);
        assert_eq!(c.auc, Some(1.0), "horizon {}", c.horizon_months);
        assert_eq!(c.abs_spearman, Some(1.0), "horizon {}", c.horizon_months);
    }
    // every volume is 0: rho is undefined and the AUC is all ties
    assert!(cells
        .iter()
        .filter(|c| c.feature == FeatureName::Volume)
        .all(|c| c.abs_spearman.is_none() && c.auc == Some(0.5)));
}

#[test]
fn shuffled_feature_has_near_chance_auc() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 48;
    let returns: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 5.0 + i as f64 } else { -5.0 - i as f64 }).collect();
    let mut feature: Vec<f64> = (0..n).map(|i| i as f64).collect();
    feature.shuffle(&mut rng);
    let labels: Vec<bool> = returns.iter().map(|r| *r > 0.0).collect();
    let auc = roc_auc(&feature, &labels).unwrap();
    assert!((auc - 0.5).abs() <= 0.2, "{auc}");
}

#[test]
fn cluster_curves_follow_construction() {
    let bots: BTreeMap<String, f64> = [
        ("a1", 0.10),
        ("a2", 0.12),
        ("a3", 0.11),
        ("b1", 0.50),
        ("b2", 0.52),
        ("b3", 0.51),
        ("c1", 0.90),
        ("c2", 0.91),
        ("c3", 0.92),
    ]
    .iter()
    .map(|(t, v)| (t.to_string(), *v))
    .collect();
    let clustering = cluster_bot_probabilities(&bots, 3, 0, 32).unwrap();
    let per_topic: BTreeMap<&str, f64> = [
        ("a1", 30.0),
        ("a2", 40.0),
        ("a3", 50.0),
        ("b1", 0.0),
        ("b2", 5.0),
        ("b3", 10.0),
        ("c1", -20.0),
        ("c2", -10.0),
        ("c3", -5.0),
    ]
    .into();
    let returns = ReturnMatrix {
        horizons: vec![1, 2],
        rows: per_topic
            .iter()
            .map(|(t, r)| (t.to_string(), vec![Some(*r), Some(2.0 * r)]))
            .collect(),
    };
    let cells = median_cluster_returns(&clustering, &returns);
    let at = |cluster: usize, h: u32| {
        cells
            .iter()
            .find(|c| c.cluster == cluster && c.horizon_months == h)
            .unwrap()
            .median_return
            .unwrap()
    };
    for h in [1, 2] {
        let scale = h as f64;
        assert_eq!(at(0, h), 40.0 * scale);
        assert_eq!(at(1, h), 5.0 * scale);
        assert_eq!(at(2, h), -10.0 * scale);
    }
}

fn prices_for(returns: &[(&str, &str, f64)]) -> BTreeMap<String, PriceSeries> {
    returns
        .iter()
        .map(|(t, created, r)| {
            let buy = reference_date(day(created));
            (t.to_string(), step_prices(t, buy, 100.0, 100.0 + r, 400))
        })
        .collect()
}

#[test]
fn hand_fixture_portfolio() {
    let rows = vec![
        feature_row("A", day("2021-01-01"), Some(1.0)),
        feature_row("B", day("2021-02-01"), Some(2.0)),
        feature_row("C", day("2021-03-01"), Some(3.0)),
    ];
    let table = feature_table(rows);
    let prices = prices_for(&[("A", "2021-01-01", 40.0), ("B", "2021-02-01", 10.0), ("C", "2021-03-01", -10.0)]);
    let spec = |threshold| StrategySpec {
        feature: FeatureName::Engagement,
        threshold,
        holding_months: 3,
        investment_date: None,
    };
    let at_two = run_threshold_backtest(&table, &prices, &spec(2.0)).unwrap();
    assert_eq!(at_two.trades.len(), 2);
    assert_eq!(at_two.portfolio_return, Some(0.0));
    let baseline = run_threshold_backtest(&table, &prices, &spec(0.0)).unwrap();
    assert_eq!(baseline.trades.len(), 3);
    assert_eq!(baseline.portfolio_return, Some((40.0 + 10.0 - 10.0) / 3.0));
    let none = run_threshold_backtest(&table, &prices, &spec(3.5)).unwrap();
    assert!(none.trades.is_empty());
    assert_eq!(none.portfolio_return, None);
}

#[test]
fn truncated_series_is_skipped() {
    let table = feature_table(vec![
        feature_row("A", day("2021-01-01"), Some(1.0)),
        feature_row("B", day("2021-01-01"), Some(1.0)),
    ]);
    let buy = reference_date(day("2021-01-01"));
    let mut prices = prices_for(&[("A", "2021-01-01", 5.0)]);
    prices.insert("B".into(), step_prices("B", buy, 1.0, 2.0, 5));
    let spec = StrategySpec {
        feature: FeatureName::Engagement,
        threshold: 0.0,
        holding_months: 1,
        investment_date: None,
    };
    let r = run_threshold_backtest(&table, &prices, &spec).unwrap();
    assert_eq!(r.trades.len(), 1);
    assert_eq!(r.skipped, vec![("B".to_string(), "no sell price".to_string())]);
}

#[test]
fn raising_threshold_never_adds_trades() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..50 {
        let n = rng.random_range(1..=15usize);
        let mut rows = Vec::new();
        let mut prices = BTreeMap::new();
        for i in 0..n {
            let id = format!("t{i}");
            let created = day("2021-01-01") + Duration::days(rng.random_range(0..200));
            let value = (rng.random_range(0..8) as f64) * 0.5;
            rows.push(feature_row(&id, created, Some(value)));
            if rng.random_bool(0.8) {
                let r = rng.random_range(-50.0..50.0);
                prices.insert(id.clone(), step_prices(&id, reference_date(created), 10.0, 10.0 + r / 10.0, 400));
            }
        }
        let table = feature_table(rows);
        let mut previous: Option<BTreeSet<String>> = None;
        for step in 0..10 {
            let spec = StrategySpec {
                feature: FeatureName::Engagement,
                threshold: step as f64 * 0.4,
                holding_months: rng.random_range(1..=6),
                investment_date: None,
            };
            let r = run_threshold_backtest(&table, &prices, &spec).unwrap();
            let traded: BTreeSet<String> = r.trades.iter().map(|t| t.topic_id.clone()).collect();
            if let Some(prev) = &previous {
                assert!(traded.is_subset(prev));
            }
            previous = Some(traded);
        }
    }
}

#[test]
fn quartiles_by_nearest_rank() {
    let values: Vec<f64> = (1..=8).map(f64::from).collect();
    assert_eq!(quartile_thresholds(&values).unwrap(), [0.0, 2.0, 4.0, 6.0, 8.0]);
    let outlier = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 100.0];
    assert_eq!(quartile_thresholds(&outlier).unwrap(), [0.0, 1.0, 1.0, 1.0, 100.0]);
}

#[test]
fn historical_threshold_from_earlier_topics() {
    let mut rows: Vec<_> = (1..=8)
        .map(|i| feature_row(&format!("pre{i}"), day("2021-01-01") + Duration::days(i), Some(i as f64)))
        .collect();
    let date = day("2021-03-01");
    rows.push(feature_row("same_day", date, Some(100.0)));
    for (i, v) in [5.0, 6.0, 7.0].iter().enumerate() {
        rows.push(feature_row(&format!("post{i}"), date + Duration::days(1 + i as i64), Some(*v)));
    }
    let prices: BTreeMap<String, PriceSeries> = rows
        .iter()
        .map(|r| {
            let s = step_prices(&r.topic_id, reference_date(r.creation_date), 1.0, 1.5, 200);
            (r.topic_id.clone(), s)
        })
        .collect();
    let table = feature_table(rows);
    let r = run_historical_backtest(&table, &prices, FeatureName::Engagement, 75, 2, date).unwrap();
    assert_eq!(r.spec.threshold, 6.0);
    let traded: Vec<&str> = r.trades.iter().map(|t| t.topic_id.as_str()).collect();
    assert_eq!(traded, ["post1", "post2"]);

    let early = run_historical_backtest(&table, &prices, FeatureName::Engagement, 75, 2, day("2020-12-01"));
    assert!(matches!(early, Err(AnalyticsError::ThresholdUnavailable(_))));
}
