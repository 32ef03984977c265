//! Is disagreement direction predictable from lexical features?
//!
//! Documents from the two directional disagreement subsets become a balanced
//! binary dataset (target `false` = model A said Relevant, `true` = model B
//! did). An L2-regularized logistic regression is scored by ROC-AUC under
//! stratified k-fold cross-validation.

mod auc;
mod cv;
mod logreg;

pub use auc::roc_auc;
pub use cv::{cross_validate, evaluate_fold, stratified_folds, CvReport};
pub use logreg::{train_logreg, train_logreg_from, LogRegConfig, LogisticModel, LogisticObjective};

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::domain;
use crate::lexical::SparseVector;
use crate::{seed, Result};

/// Balanced probe dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDataset {
    pub doc_ids: Vec<String>,
    pub features: Vec<SparseVector>,
    /// `true` for documents only model B labeled Relevant.
    pub targets: Vec<bool>,
    pub n_features: usize,
    pub seed: u64,
    /// Subset sizes before balancing, (A-only, B-only).
    pub source_counts: (usize, usize),
}

impl ProbeDataset {
    /// Wraps already-prepared examples without balancing.
    pub fn new(features: Vec<SparseVector>, targets: Vec<bool>, n_features: usize) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(domain!("{} feature rows but {} targets", features.len(), targets.len()));
        }
        if let Some(bad) = features.iter().flat_map(|f| f.indices()).find(|&&i| i as usize >= n_features) {
            return Err(domain!("feature index {bad} outside dimension {n_features}"));
        }
        let positives = targets.iter().filter(|&&t| t).count();
        let source_counts = (targets.len() - positives, positives);
        Ok(Self {
            doc_ids: (0..features.len()).map(|i| alloc::format!("#{i}")).collect(),
            features,
            targets,
            n_features,
            seed: 0,
            source_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// (negatives, positives)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.targets.iter().filter(|&&t| t).count();
        (self.targets.len() - pos, pos)
    }

    /// Rows selected by `keep`, in order.
    pub fn select(&self, keep: impl Fn(usize) -> bool) -> ProbeDataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        ProbeDataset {
            doc_ids: idx.iter().map(|&i| self.doc_ids[i].clone()).collect(),
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            n_features: self.n_features,
            seed: self.seed,
            source_counts: self.source_counts,
        }
    }
}

/// Builds a balanced dataset by downsampling the larger subset uniformly at
/// random to the size of the smaller one. Kept documents stay in input
/// order, A-only rows first.
pub fn build_probe_dataset(
    a_only: &[(String, SparseVector)],
    b_only: &[(String, SparseVector)],
    n_features: usize,
    seed: u64,
) -> Result<ProbeDataset> {
    if a_only.is_empty() || b_only.is_empty() {
        return Err(domain!(
            "probe needs both disagreement directions (A-only: {}, B-only: {})",
            a_only.len(),
            b_only.len()
        ));
    }
    let size = a_only.len().min(b_only.len());
    let mut rng = seed::rng(seed);
    let mut pick = |side: &[(String, SparseVector)]| -> Vec<usize> {
        if side.len() == size {
            (0..size).collect()
        } else {
            let mut chosen = index::sample(&mut rng, side.len(), size).into_vec();
            chosen.sort_unstable();
            chosen
        }
    };
    let keep_a = pick(a_only);
    let keep_b = pick(b_only);

    let mut doc_ids = Vec::with_capacity(2 * size);
    let mut features = Vec::with_capacity(2 * size);
    let mut targets = Vec::with_capacity(2 * size);
    for (rows, side, target) in [(&keep_a, a_only, false), (&keep_b, b_only, true)] {
        for &i in rows.iter() {
            doc_ids.push(side[i].0.clone());
            features.push(side[i].1.clone());
            targets.push(target);
        }
    }
    if let Some(bad) = features.iter().flat_map(|f| f.indices()).find(|&&i| i as usize >= n_features) {
        return Err(domain!("feature index {bad} outside dimension {n_features}"));
    }
    Ok(ProbeDataset { doc_ids, features, targets, n_features, seed, source_counts: (a_only.len(), b_only.len()) })
}
