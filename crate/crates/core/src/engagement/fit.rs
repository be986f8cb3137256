use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::likelihood::{gradient, log_likelihood_where};
use super::EngagementModel;
use crate::corpus::InteractionDataset;
use crate::error::EstimationError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcludedTopic {
    pub topic_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    ClosedForm,
    /// Coordinate ascent that met its tolerance after `iterations` sweeps.
    Numeric { iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: EngagementModel,
    /// `None` when the data is impossible under every model, e.g. a poster
    /// with zero followers received interactions.
    pub log_likelihood_at_fit: Option<f64>,
    /// Projected analytic gradient sup-norm at the returned parameters.
    pub gradient_sup_norm_at_fit: f64,
    pub excluded_topics: Vec<ExcludedTopic>,
    pub method: FitMethod,
    /// n over the fitted topics.
    pub total_interactions: u64,
    /// l_i over the fitted topics, aligned with the kinds.
    pub kind_totals: Vec<u64>,
}

impl FitReport {
    pub fn diagnostics(&self) -> Value {
        let method = match self.method {
            FitMethod::ClosedForm => json!({"kind": "closed_form"}),
            FitMethod::Numeric { iterations } => json!({"kind": "numeric", "iterations": iterations}),
        };
        let kind_totals: serde_json::Map<String, Value> = self
            .model
            .kinds
            .names()
            .iter()
            .zip(&self.kind_totals)
            .map(|(k, l)| (k.clone(), json!(l)))
            .collect();
        json!({
            "method": method,
            "log_likelihood": self.log_likelihood_at_fit,
            "gradient_sup_norm": self.gradient_sup_norm_at_fit,
            "total_interactions": self.total_interactions,
            "kind_totals": kind_totals,
            "excluded_topics": self
                .excluded_topics
                .iter()
                .map(|e| json!({"topic_id": e.topic_id, "reason": e.reason}))
                .collect::<Vec<_>>(),
        })
    }

    pub fn to_json(&self) -> String {
        self.model.to_json(&self.diagnostics())
    }
}

/// Topics usable for estimation (positive exposure) and the excluded rest.
struct FitScope {
    topics: Vec<(String, u64, u64)>, // (topic, n_c, v_c)
    excluded: Vec<ExcludedTopic>,
    kind_totals: Vec<u64>,
    total: u64,
}

fn scope(dataset: &InteractionDataset) -> Result<FitScope, EstimationError> {
    let kinds = dataset.kinds.len();
    let mut topics = Vec::new();
    let mut excluded = Vec::new();
    let mut kind_totals = vec![0u64; kinds];
    for topic_id in dataset.topics.keys() {
        let agg = dataset.topic_aggregate(topic_id);
        match agg {
            None => excluded.push(ExcludedTopic {
                topic_id: topic_id.clone(),
                reason: "no posts".into(),
            }),
            Some(a) if a.posts == 0 => excluded.push(ExcludedTopic {
                topic_id: topic_id.clone(),
                reason: "no posts".into(),
            }),
            Some(a) if a.exposure == 0 => excluded.push(ExcludedTopic {
                topic_id: topic_id.clone(),
                reason: "zero follower exposure".into(),
            }),
            Some(a) => {
                topics.push((topic_id.clone(), a.interactions, a.exposure));
                for (t, c) in kind_totals.iter_mut().zip(&a.per_kind) {
                    *t += c;
                }
            }
        }
    }
    let total: u64 = kind_totals.iter().sum();
    if total == 0 {
        return Err(EstimationError::EmptyData);
    }
    if kind_totals[dataset.kinds.reference()] == 0 {
        return Err(EstimationError::ZeroReference(dataset.kinds.reference_name().to_string()));
    }
    Ok(FitScope {
        topics,
        excluded,
        kind_totals,
        total,
    })
}

fn finish(
    dataset: &InteractionDataset,
    model: EngagementModel,
    scope: FitScope,
    method: FitMethod,
) -> Result<FitReport, EstimationError> {
    let fitted: std::collections::BTreeSet<&str> = scope.topics.iter().map(|(t, _, _)| t.as_str()).collect();
    let log_likelihood_at_fit = match log_likelihood_where(dataset, &model, |t| fitted.contains(t)) {
        Ok(ll) => Some(ll),
        Err(EstimationError::ImpossibleData { .. }) => None,
        Err(e) => return Err(e),
    };
    let grad = gradient(dataset, &model)?;
    Ok(FitReport {
        gradient_sup_norm_at_fit: grad.projected_sup_norm(&model),
        model,
        log_likelihood_at_fit,
        excluded_topics: scope.excluded,
        method,
        total_interactions: scope.total,
        kind_totals: scope.kind_totals,
    })
}

/// Closed-form maximum-likelihood fit with the reference kind pinned to 1.
///
/// Setting the gradient to zero gives `sum_c alpha_c v_c = l_ref`,
/// `beta_i = l_i / l_ref` and therefore `B = sum_i beta_i = n / l_ref`, so
/// `alpha_c = n_c / (v_c B) = n_c l_ref / (v_c n)`.
///
/// Note that the frequently quoted form `n_c n / (v_c l_ref)` is not a
/// stationary point unless there is a single interaction kind; it differs
/// from the maximizer by the constant factor `(n / l_ref)^2`, which leaves
/// the ranking of topics unchanged.
///
/// Topics with no posts or with zero follower exposure are excluded, and
/// their interactions do not enter `n` or `l_i`.
pub fn fit_closed_form(dataset: &InteractionDataset) -> Result<FitReport, EstimationError> {
    let scope = scope(dataset)?;
    let reference = dataset.kinds.reference();
    let l_ref = scope.kind_totals[reference] as f64;
    let n = scope.total as f64;

    let beta: Vec<f64> = scope
        .kind_totals
        .iter()
        .enumerate()
        .map(|(i, &l)| if i == reference { 1.0 } else { l as f64 / l_ref })
        .collect();
    // (n_c / v_c) * (l_ref / n): exact n_c / v_c when there is a single kind
    let shrink = l_ref / n;
    let alpha: BTreeMap<String, f64> = scope
        .topics
        .iter()
        .map(|(t, n_c, v_c)| (t.clone(), (*n_c as f64 / *v_c as f64) * shrink))
        .collect();

    let model = EngagementModel::new(dataset.kinds.clone(), alpha, beta)?;
    finish(dataset, model, scope, FitMethod::ClosedForm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericOptions {
    /// Bound on the relative stationarity residual `|theta dL/dtheta| / count`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NumericOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

/// Numeric maximizer by block coordinate ascent.
///
/// Each sweep maximizes the likelihood exactly in all `alpha` for fixed
/// `beta` and then in all non-reference `beta` for fixed `alpha`. The
/// objective is concave in the log-parameters, so the sweeps converge to
/// the unique maximizer. Iteration stops once every stationarity residual
/// `|theta * dL/dtheta|`, divided by the matching count `n_c` or `l_i`,
/// falls below `options.tolerance`.
pub fn fit_numeric(dataset: &InteractionDataset, options: NumericOptions) -> Result<FitReport, EstimationError> {
    let scope = scope(dataset)?;
    let reference = dataset.kinds.reference();
    let kinds = dataset.kinds.len();

    let mut beta = vec![1.0f64; kinds];
    let mut alpha = vec![0.0f64; scope.topics.len()];
    let mut iterations = 0usize;
    let mut residual = f64::INFINITY;

    while iterations < options.max_iterations {
        iterations += 1;
        let beta_total: f64 = beta.iter().sum();
        for (a, (_, n_c, v_c)) in alpha.iter_mut().zip(&scope.topics) {
            *a = *n_c as f64 / (*v_c as f64 * beta_total);
        }
        let weighted: f64 = alpha.iter().zip(&scope.topics).map(|(a, (_, _, v))| a * *v as f64).sum();
        for (i, b) in beta.iter_mut().enumerate() {
            if i != reference {
                *b = scope.kind_totals[i] as f64 / weighted;
            }
        }

        // residuals at the updated point
        let beta_total: f64 = beta.iter().sum();
        let weighted: f64 = alpha.iter().zip(&scope.topics).map(|(a, (_, _, v))| a * *v as f64).sum();
        residual = 0.0;
        for (a, (_, n_c, v_c)) in alpha.iter().zip(&scope.topics) {
            if *n_c > 0 {
                let r = (*n_c as f64 - a * *v_c as f64 * beta_total).abs() / *n_c as f64;
                residual = residual.max(r);
            }
        }
        for (i, b) in beta.iter().enumerate() {
            let l = scope.kind_totals[i];
            if l > 0 {
                residual = residual.max((l as f64 - b * weighted).abs() / l as f64);
            }
        }
        if residual < options.tolerance {
            let alpha_map = scope
                .topics
                .iter()
                .zip(&alpha)
                .map(|((t, _, _), a)| (t.clone(), *a))
                .collect();
            let model = EngagementModel::new(dataset.kinds.clone(), alpha_map, beta)?;
            return finish(dataset, model, scope, FitMethod::Numeric { iterations });
        }
    }
    Err(EstimationError::NotConverged { iterations, residual })
}
