use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::AnalyticsError;

pub const DEFAULT_RESTARTS: usize = 32;

const MAX_LLOYD_ITERATIONS: usize = 1_000;

/// 1-D k-means result. Centers are sorted ascending and cluster indices
/// refer to that order.
#[derive(Debug, Clone, PartialEq)]
pub struct BotClustering {
    pub k: usize,
    pub centers: Vec<f64>,
    pub assignment: BTreeMap<String, usize>,
    pub inertia: f64,
}

impl BotClustering {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in self.assignment.values() {
            sizes[c] += 1;
        }
        sizes
    }
}

/// Lloyd's algorithm with k-means++ seeding, keeping the lowest-inertia run
/// of `restarts`. Restart `r` draws from stream `r` of a ChaCha8 generator
/// seeded with `seed`, so adding restarts never worsens the result.
pub fn cluster_bot_probabilities(
    values: &BTreeMap<String, f64>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<BotClustering, AnalyticsError> {
    if k == 0 {
        return Err(AnalyticsError::InvalidArgument("k must be at least 1".into()));
    }
    if values.values().any(|v| !v.is_finite()) {
        return Err(AnalyticsError::NonFinite);
    }
    let points: Vec<f64> = values.values().copied().collect();
    let mut distinct = points.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < k {
        return Err(AnalyticsError::TooFewDistinct {
            distinct: distinct.len(),
            k,
        });
    }

    let mut best: Option<(Vec<f64>, Vec<usize>, f64)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let (centers, labels, inertia) = lloyd(&points, plus_plus_init(&points, k, &mut rng));
        if best.as_ref().is_none_or(|b| inertia < b.2) {
            best = Some((centers, labels, inertia));
        }
    }
    let (centers, labels, inertia) = best.expect("at least one restart");

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
    let mut rank = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    Ok(BotClustering {
        k,
        centers: order.iter().map(|&i| centers[i]).collect(),
        assignment: values.keys().cloned().zip(labels.iter().map(|&l| rank[l])).collect(),
        inertia,
    })
}

fn plus_plus_init(points: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..points.len())]);
    let mut dist2: Vec<f64> = points.iter().map(|p| (p - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = dist2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, d) in dist2.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            pick = Some(i);
            if target < *d {
                break;
            }
            target -= d;
        }
        let c = points[pick.expect("fewer distinct points than clusters")];
        centers.push(c);
        for (d, p) in dist2.iter_mut().zip(points) {
            *d = d.min((p - c).powi(2));
        }
    }
    centers
}

fn nearest(centers: &[f64], p: f64) -> usize {
    let mut best = 0;
    for (j, c) in centers.iter().enumerate().skip(1) {
        if (p - c).abs() < (p - centers[best]).abs() {
            best = j;
        }
    }
    best
}

fn lloyd(points: &[f64], mut centers: Vec<f64>) -> (Vec<f64>, Vec<usize>, f64) {
    let k = centers.len();
    let mut labels: Vec<usize> = points.iter().map(|&p| nearest(&centers, p)).collect();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&p, &l) in points.iter().zip(&labels) {
            sums[l] += p;
            counts[l] += 1;
        }
        for j in 0..k {
            // an emptied cluster keeps its previous center
            if counts[j] > 0 {
                centers[j] = sums[j] / counts[j] as f64;
            }
        }
        let next: Vec<usize> = points.iter().map(|&p| nearest(&centers, p)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| (p - centers[l]).powi(2))
        .sum();
    (centers, labels, inertia)
}
