use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sparse::SparseVector;
use crate::error::domain;
use crate::{seed, Result};

/// How the permutation count turns into a p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueRule {
    /// `(extreme + 1) / (n_perm + 1)`; always a valid p in (0, 1].
    #[default]
    AddOne,
    /// `extreme / n_perm`, floored at `1 / n_perm` so it stays in (0, 1].
    Proportion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub n_permutations: usize,
    pub seed: u64,
    #[serde(default)]
    pub rule: PValueRule,
}

impl PermutationConfig {
    pub fn new(n_permutations: usize, seed: u64) -> Self {
        Self { n_permutations, seed, rule: PValueRule::AddOne }
    }
}

/// Nonzero entries of one term column over the pooled documents.
struct Column {
    values: Vec<f64>,
    observed_sum_a: f64,
    total: f64,
    n_a: usize,
    n_b: usize,
}

impl Column {
    fn extract(a: &[SparseVector], b: &[SparseVector], term: u32) -> Self {
        let mut values = Vec::new();
        let mut observed_sum_a = 0.0;
        for v in a {
            let w = v.get(term);
            if w != 0.0 {
                values.push(w);
                observed_sum_a += w;
            }
        }
        let mut total = observed_sum_a;
        for v in b {
            let w = v.get(term);
            if w != 0.0 {
                values.push(w);
                total += w;
            }
        }
        Self { values, observed_sum_a, total, n_a: a.len(), n_b: b.len() }
    }

    /// `mean_b - mean_a` when group A's entries sum to `sum_a`.
    fn delta(&self, sum_a: f64) -> f64 {
        (self.total - sum_a) / self.n_b as f64 - sum_a / self.n_a as f64
    }

    /// Bound on the rounding gap between two evaluations of `delta` for the
    /// same assignment with entries summed in different orders.
    fn tie_tolerance(&self) -> f64 {
        let k = (self.values.len() + 2) as f64;
        4.0 * k * f64::EPSILON * self.total * (1.0 / self.n_a as f64 + 1.0 / self.n_b as f64)
    }
}

/// Two-sided permutation p-value for the mean-difference statistic of one
/// term between groups A and B.
///
/// Group labels are re-drawn uniformly `n_permutations` times. Only documents
/// holding the term affect the statistic, so each relabeling assigns those
/// documents to A by sequential selection sampling, which is distributed
/// exactly like shuffling all labels. The stream is seeded from
/// `(config.seed, term)`, so results do not depend on which other terms are
/// tested or in what order.
pub fn permutation_test(
    vectors_a: &[SparseVector],
    vectors_b: &[SparseVector],
    term: u32,
    dim: usize,
    config: &PermutationConfig,
) -> Result<f64> {
    if term as usize >= dim {
        return Err(domain!("term index {term} is not in a vocabulary of {dim} terms"));
    }
    if vectors_a.is_empty() || vectors_b.is_empty() {
        return Err(domain!("permutation test needs two non-empty groups"));
    }
    if config.n_permutations < 1 {
        return Err(domain!("n_permutations must be at least 1"));
    }

    let col = Column::extract(vectors_a, vectors_b, term);
    let observed = col.delta(col.observed_sum_a).abs();
    let threshold = observed - col.tie_tolerance();
    let n_total = col.n_a + col.n_b;

    let mut rng = seed::rng(seed::for_index(config.seed, u64::from(term)));
    let mut extreme = 0usize;
    for _ in 0..config.n_permutations {
        let mut slots_a = col.n_a;
        let mut remaining = n_total;
        let mut sum_a = 0.0;
        for &w in &col.values {
            if slots_a == 0 {
                break;
            }
            if rng.gen_range(0..remaining) < slots_a {
                sum_a += w;
                slots_a -= 1;
            }
            remaining -= 1;
        }
        if col.delta(sum_a).abs() >= threshold {
            extreme += 1;
        }
    }

    let n = config.n_permutations as f64;
    Ok(match config.rule {
        PValueRule::AddOne => (extreme as f64 + 1.0) / (n + 1.0),
        PValueRule::Proportion => (extreme.max(1) as f64) / n,
    })
}

/// [`permutation_test`] for several terms, in the order given.
pub fn permutation_tests(
    vectors_a: &[SparseVector],
    vectors_b: &[SparseVector],
    terms: &[u32],
    dim: usize,
    config: &PermutationConfig,
) -> Result<Vec<f64>> {
    terms.iter().map(|&t| permutation_test(vectors_a, vectors_b, t, dim, config)).collect()
}
