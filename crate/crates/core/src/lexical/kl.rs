use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::domain;
use crate::Result;

/// Additively smoothed, normalized term weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDistribution {
    pub probabilities: Vec<f64>,
    pub epsilon: f64,
}

impl TermDistribution {
    /// `p_i = (w_i + eps) / sum_j (w_j + eps)`.
    pub fn smoothed(weights: &[f64], epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(domain!("smoothing epsilon must be positive, got {epsilon}"));
        }
        if weights.is_empty() {
            return Err(domain!("distribution over an empty vocabulary"));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(domain!("term weight {w} is not a finite non-negative number"));
        }
        let total: f64 = weights.iter().map(|w| w + epsilon).sum();
        let probabilities = weights.iter().map(|w| (w + epsilon) / total).collect();
        Ok(Self { probabilities, epsilon })
    }
}

/// `D(P || Q)` in nats between the smoothed versions of two weight vectors
/// over the same vocabulary.
pub fn kl_divergence(mean_a: &[f64], mean_b: &[f64], epsilon: f64) -> Result<f64> {
    if mean_a.len() != mean_b.len() {
        return Err(domain!("vocabulary mismatch: {} vs {} terms", mean_a.len(), mean_b.len()));
    }
    let p = TermDistribution::smoothed(mean_a, epsilon)?;
    let q = TermDistribution::smoothed(mean_b, epsilon)?;
    let d: f64 = p.probabilities.iter().zip(&q.probabilities).map(|(&pi, &qi)| pi * libm::log(pi / qi)).sum();
    Ok(d.max(0.0))
}
