//! Inputs shared by the benchmarks.

use std::collections::BTreeMap;

use engage_core::corpus::{DatasetOptions, InteractionDataset};
use engage_core::synth::{generate_universe, UniverseSpec};

/// Aggregated dataset of a seeded synthetic universe.
pub fn synthetic_dataset(topics: usize, users: usize, posts_per_topic: u64) -> InteractionDataset {
    let spec = UniverseSpec {
        topics,
        users,
        posts_per_topic,
        ..UniverseSpec::default()
    };
    generate_universe(&spec, 0)
        .expect("valid universe")
        .corpus
        .build_dataset(&DatasetOptions::default())
        .expect("dataset builds")
}

/// Deterministic scores with ties and alternating labels.
pub fn scores_and_labels(n: usize) -> (Vec<f64>, Vec<bool>) {
    let scores = (0..n).map(|i| ((i * 7919) % 101) as f64).collect();
    let labels = (0..n).map(|i| (i * 31) % 7 < 3).collect();
    (scores, labels)
}

/// Bot probabilities spread over [0.2, 0.6).
pub fn bot_probabilities(n: usize) -> BTreeMap<String, f64> {
    (0..n).map(|i| (format!("t{i}"), 0.2 + ((i * 37) % 100) as f64 * 0.004)).collect()
}
