use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{roc_auc, train_logreg, LogRegConfig, ProbeDataset};
use crate::error::domain;
use crate::{seed, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub fold_aucs: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    pub n_examples: usize,
    pub n_features: usize,
    pub lambda: f64,
    pub stratified: bool,
    /// Folds whose optimizer met the gradient tolerance.
    pub converged_folds: usize,
}

impl CvReport {
    pub fn from_folds(
        k: usize,
        seed: u64,
        dataset: &ProbeDataset,
        config: &LogRegConfig,
        folds: &[(f64, bool)],
    ) -> Self {
        let fold_aucs: Vec<f64> = folds.iter().map(|&(auc, _)| auc).collect();
        let n = fold_aucs.len() as f64;
        let mean = fold_aucs.iter().sum::<f64>() / n;
        let var = fold_aucs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        Self {
            k,
            seed,
            mean,
            std: libm::sqrt(var),
            fold_aucs,
            n_examples: dataset.len(),
            n_features: dataset.n_features,
            lambda: config.lambda,
            stratified: true,
            converged_folds: folds.iter().filter(|&&(_, c)| c).count(),
        }
    }
}

/// Assigns each example a fold in `0..k`. Each class is shuffled with its own
/// stream and dealt round-robin; the second class continues where the first
/// stopped so fold sizes differ by at most one.
pub fn stratified_folds(targets: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(domain!("cross-validation needs k >= 2, got {k}"));
    }
    let mut members: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &t) in targets.iter().enumerate() {
        members[usize::from(t)].push(i);
    }
    for (class, m) in members.iter().enumerate() {
        if m.len() < k {
            return Err(domain!("class {class} has {} examples, fewer than k = {k}", m.len()));
        }
    }
    let mut folds = vec![0; targets.len()];
    let mut next = 0;
    for (class, m) in members.iter_mut().enumerate() {
        m.shuffle(&mut seed::rng(seed::for_index(seed, class as u64)));
        for &i in m.iter() {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(folds)
}

/// Trains on every fold but `fold` and returns (held-out AUC, converged).
pub fn evaluate_fold(
    dataset: &ProbeDataset,
    folds: &[usize],
    fold: usize,
    config: &LogRegConfig,
) -> Result<(f64, bool)> {
    let train = dataset.select(|i| folds[i] != fold);
    let test = dataset.select(|i| folds[i] == fold);
    let model = train_logreg(&train, config)?;
    let scores: Vec<f64> = test.features.iter().map(|x| model.decision(x)).collect();
    Ok((roc_auc(&scores, &test.targets)?, model.converged))
}

/// Stratified k-fold cross-validated ROC-AUC of the logistic probe.
pub fn cross_validate(dataset: &ProbeDataset, k: usize, seed: u64, config: &LogRegConfig) -> Result<CvReport> {
    let folds = stratified_folds(&dataset.targets, k, seed)?;
    let results = (0..k).map(|f| evaluate_fold(dataset, &folds, f, config)).collect::<Result<Vec<_>>>()?;
    Ok(CvReport::from_folds(k, seed, dataset, config, &results))
}
