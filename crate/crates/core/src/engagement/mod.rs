//! Poisson engagement model.
//!
//! Every post `k` by user `u` about topic `c` receives a Poisson number of
//! interactions of kind `i` with mean `beta_i * alpha_c * f_u`, where `f_u` is
//! the poster's follower count. `alpha_c` is the topic's engagement
//! coefficient, `beta_i` the interaction coefficient, and the reference kind's
//! coefficient is pinned to 1 to make the model identifiable.

mod fit;
mod likelihood;
mod sample;

pub use fit::{fit_closed_form, fit_numeric, ExcludedTopic, FitMethod, FitReport, NumericOptions};
pub use likelihood::{gradient, log_likelihood, Gradient};
pub use sample::{sample_posts, sample_synthetic, PlanEntry, SamplingPlan};

use std::collections::BTreeMap;

use serde_json::Value;

use crate::corpus::InteractionKindSet;
use crate::error::EstimationError;

/// Fitted (or planted) engagement and interaction coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct EngagementModel {
    pub kinds: InteractionKindSet,
    pub alpha: BTreeMap<String, f64>,
    /// Aligned with `kinds`; the reference entry is exactly 1.
    pub beta: Vec<f64>,
}

impl EngagementModel {
    /// Builds a model, checking the reference pin and non-negativity.
    pub fn new(kinds: InteractionKindSet, alpha: BTreeMap<String, f64>, beta: Vec<f64>) -> Result<Self, EstimationError> {
        if beta.len() != kinds.len() {
            return Err(EstimationError::ModelFormat(format!(
                "{} interaction coefficients for {} kinds",
                beta.len(),
                kinds.len()
            )));
        }
        if beta[kinds.reference()] != 1.0 {
            return Err(EstimationError::InvalidParameter {
                name: format!("beta[{}]", kinds.reference_name()),
                value: beta[kinds.reference()],
            });
        }
        for (name, &b) in kinds.names().iter().zip(&beta) {
            if !(b.is_finite() && b >= 0.0) {
                return Err(EstimationError::InvalidParameter {
                    name: format!("beta[{name}]"),
                    value: b,
                });
            }
        }
        for (topic, &a) in &alpha {
            if !(a.is_finite() && a >= 0.0) {
                return Err(EstimationError::InvalidParameter {
                    name: format!("alpha[{topic}]"),
                    value: a,
                });
            }
        }
        Ok(Self { kinds, alpha, beta })
    }

    pub fn beta_of(&self, kind: &str) -> Option<f64> {
        self.kinds.index_of(kind).map(|i| self.beta[i])
    }

    /// Sum of all interaction coefficients.
    pub fn beta_total(&self) -> f64 {
        self.beta.iter().sum()
    }

    /// Poisson mean for one post of a user with `followers` followers.
    pub fn mean(&self, topic_id: &str, kind: usize, followers: u64) -> Option<f64> {
        self.alpha
            .get(topic_id)
            .map(|a| self.beta[kind] * a * followers as f64)
    }

    /// Serialize as `{"reference_kind", "beta", "alpha", "diagnostics"}` with
    /// every float written to 17 significant digits.
    pub fn to_json(&self, diagnostics: &Value) -> String {
        let mut out = String::from("{\n");
        out.push_str(&format!("  \"reference_kind\": {},\n", json_str(self.kinds.reference_name())));
        out.push_str("  \"beta\": {");
        out.push_str(
            &self
                .kinds
                .names()
                .iter()
                .zip(&self.beta)
                .map(|(k, b)| format!("\n    {}: {}", json_str(k), json_float(*b)))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push_str("\n  },\n");
        out.push_str("  \"alpha\": {");
        out.push_str(
            &self
                .alpha
                .iter()
                .map(|(t, a)| format!("\n    {}: {}", json_str(t), json_float(*a)))
                .collect::<Vec<_>>()
                .join(","),
        );
        if !self.alpha.is_empty() {
            out.push_str("\n  ");
        }
        out.push_str("},\n");
        out.push_str("  \"diagnostics\": ");
        write_json_value(&mut out, diagnostics, 1);
        out.push_str("\n}\n");
        out
    }

    /// Parse a model written by [`EngagementModel::to_json`].
    pub fn from_json(text: &str) -> Result<Self, EstimationError> {
        let bad = |m: &str| EstimationError::ModelFormat(m.to_string());
        let v: Value = serde_json::from_str(text).map_err(|e| EstimationError::ModelFormat(e.to_string()))?;
        let reference = v["reference_kind"].as_str().ok_or_else(|| bad("missing reference_kind"))?;
        let beta_obj = v["beta"].as_object().ok_or_else(|| bad("missing beta"))?;
        // key order of `beta` is the kind order
        let names: Vec<String> = beta_obj.keys().cloned().collect();
        let kinds = InteractionKindSet::new(&names, reference).map_err(|e| EstimationError::ModelFormat(e.to_string()))?;
        let beta = names
            .iter()
            .map(|k| beta_obj.get(k).and_then(Value::as_f64).ok_or_else(|| bad("beta entry missing")))
            .collect::<Result<Vec<_>, _>>()?;
        let alpha = v["alpha"]
            .as_object()
            .ok_or_else(|| bad("missing alpha"))?
            .iter()
            .map(|(t, a)| a.as_f64().map(|a| (t.clone(), a)).ok_or_else(|| bad("alpha entry not a number")))
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        Self::new(kinds, alpha, beta)
    }
}

/// 17 significant digits, or `null` for non-finite values.
pub fn json_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Pretty-prints a JSON value, routing floats through [`json_float`].
pub fn write_json_value(out: &mut String, v: &Value, depth: usize) {
    let pad = "  ".repeat(depth + 1);
    let close = "  ".repeat(depth);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&json_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&json_str(s)),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&pad);
                write_json_value(out, item, depth + 1);
            }
            out.push('\n');
            out.push_str(&close);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&pad);
                out.push_str(&json_str(k));
                out.push_str(": ");
                write_json_value(out, item, depth + 1);
            }
            out.push('\n');
            out.push_str(&close);
            out.push('}');
        }
    }
}
