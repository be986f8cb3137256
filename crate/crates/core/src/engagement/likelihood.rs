use std::collections::BTreeMap;

use statrs::function::factorial::ln_factorial;

use super::EngagementModel;
use crate::corpus::InteractionDataset;
use crate::error::EstimationError;

/// Exact Poisson log-likelihood of every retained post, including the
/// `-log(n!)` terms, so the value is a true log-probability.
///
/// Evaluated post by post from the raw counts rather than from the
/// aggregates, which keeps it an independent check on [`gradient`].
/// A zero mean paired with a positive count yields
/// [`EstimationError::ImpossibleData`].
pub fn log_likelihood(dataset: &InteractionDataset, model: &EngagementModel) -> Result<f64, EstimationError> {
    log_likelihood_where(dataset, model, |_| true)
}

pub(crate) fn log_likelihood_where(
    dataset: &InteractionDataset,
    model: &EngagementModel,
    include: impl Fn(&str) -> bool,
) -> Result<f64, EstimationError> {
    check_kinds(dataset, model)?;
    let mut total = 0.0;
    for post in &dataset.posts {
        if !include(&post.topic_id) {
            continue;
        }
        let alpha = *model
            .alpha
            .get(&post.topic_id)
            .ok_or_else(|| EstimationError::MissingParameter(format!("alpha[{}]", post.topic_id)))?;
        let followers = dataset
            .profiles
            .get(&post.user_id)
            .ok_or_else(|| EstimationError::MissingParameter(format!("follower count of `{}`", post.user_id)))?
            .follower_count;
        for (kind, &count) in post.counts.iter().enumerate() {
            let mu = model.beta[kind] * alpha * followers as f64;
            if mu == 0.0 {
                if count > 0 {
                    return Err(EstimationError::ImpossibleData {
                        topic_id: post.topic_id.clone(),
                        kind: dataset.kinds.names()[kind].clone(),
                    });
                }
                continue;
            }
            let n = count as f64;
            total += -mu + n * mu.ln() - ln_factorial(count);
        }
    }
    Ok(total)
}

/// Analytic gradient of the log-likelihood.
///
/// `d alpha_c = -v_c * B + n_c / alpha_c` and
/// `d beta_i = -sum_c alpha_c v_c + l_i / beta_i`, with `B` the sum of all
/// interaction coefficients. The reference kind is pinned and omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub alpha: BTreeMap<String, f64>,
    /// Non-reference kinds only.
    pub beta: BTreeMap<String, f64>,
}

impl Gradient {
    pub fn sup_norm(&self) -> f64 {
        self.alpha.values().chain(self.beta.values()).fold(0.0, |m, g| m.max(g.abs()))
    }

    /// Sup-norm of the gradient projected onto the feasible set `theta >= 0`:
    /// a component pushing a zero parameter further negative is dropped.
    pub fn projected_sup_norm(&self, model: &EngagementModel) -> f64 {
        let mut norm: f64 = 0.0;
        for (topic, g) in &self.alpha {
            let at_bound = model.alpha.get(topic).is_some_and(|a| *a == 0.0);
            if !(at_bound && *g < 0.0) {
                norm = norm.max(g.abs());
            }
        }
        for (kind, g) in &self.beta {
            let at_bound = model.beta_of(kind).is_some_and(|b| b == 0.0);
            if !(at_bound && *g < 0.0) {
                norm = norm.max(g.abs());
            }
        }
        norm
    }
}

/// Analytic gradient at `model` over the topics with positive follower exposure.
///
/// Topics with `v_c = 0` carry no information about any parameter and are
/// skipped, along with their interactions.
pub fn gradient(dataset: &InteractionDataset, model: &EngagementModel) -> Result<Gradient, EstimationError> {
    check_kinds(dataset, model)?;
    let kinds = dataset.kinds.len();
    let beta_total = model.beta_total();
    let mut kind_totals = vec![0u64; kinds];
    let mut weighted_exposure = 0.0;
    let mut d_alpha = BTreeMap::new();

    for (topic_id, agg) in &dataset.aggregates.per_topic {
        if agg.exposure == 0 {
            continue;
        }
        let alpha = *model
            .alpha
            .get(topic_id)
            .ok_or_else(|| EstimationError::MissingParameter(format!("alpha[{topic_id}]")))?;
        let v = agg.exposure as f64;
        let g = if agg.interactions == 0 {
            -v * beta_total
        } else if alpha == 0.0 {
            return Err(EstimationError::SingularGradient(format!("alpha[{topic_id}]")));
        } else {
            -v * beta_total + agg.interactions as f64 / alpha
        };
        d_alpha.insert(topic_id.clone(), g);
        weighted_exposure += alpha * v;
        for (t, c) in kind_totals.iter_mut().zip(&agg.per_kind) {
            *t += c;
        }
    }

    let mut d_beta = BTreeMap::new();
    for (i, name) in dataset.kinds.names().iter().enumerate() {
        if i == dataset.kinds.reference() {
            continue;
        }
        let b = model.beta[i];
        let g = if kind_totals[i] == 0 {
            -weighted_exposure
        } else if b == 0.0 {
            return Err(EstimationError::SingularGradient(format!("beta[{name}]")));
        } else {
            -weighted_exposure + kind_totals[i] as f64 / b
        };
        d_beta.insert(name.clone(), g);
    }
    Ok(Gradient {
        alpha: d_alpha,
        beta: d_beta,
    })
}

fn check_kinds(dataset: &InteractionDataset, model: &EngagementModel) -> Result<(), EstimationError> {
    if dataset.kinds.names() != model.kinds.names() {
        return Err(EstimationError::ModelFormat(format!(
            "model kinds {:?} differ from dataset kinds {:?}",
            model.kinds.names(),
            dataset.kinds.names()
        )));
    }
    Ok(())
}
