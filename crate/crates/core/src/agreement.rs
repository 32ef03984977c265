//! Agreement statistics over paired labels.

use alloc::collections::BTreeSet;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::labeling::{Label, PairedLabelSet};
use crate::{Error, Result};

/// 2x2 confusion table of two raters. "a" is the first model, "b" the second.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub both_relevant: u64,
    pub a_only_relevant: u64,
    pub b_only_relevant: u64,
    pub both_nonrelevant: u64,
}

impl ConfusionCounts {
    pub const fn new(both_relevant: u64, a_only_relevant: u64, b_only_relevant: u64, both_nonrelevant: u64) -> Self {
        Self { both_relevant, a_only_relevant, b_only_relevant, both_nonrelevant }
    }

    pub fn total(&self) -> u64 {
        self.both_relevant + self.a_only_relevant + self.b_only_relevant + self.both_nonrelevant
    }

    pub fn add(&mut self, a: Label, b: Label) {
        match (a, b) {
            (Label::Relevant, Label::Relevant) => self.both_relevant += 1,
            (Label::Relevant, Label::NonRelevant) => self.a_only_relevant += 1,
            (Label::NonRelevant, Label::Relevant) => self.b_only_relevant += 1,
            (Label::NonRelevant, Label::NonRelevant) => self.both_nonrelevant += 1,
        }
    }

    /// The table seen with the raters exchanged.
    pub fn transposed(&self) -> Self {
        Self { a_only_relevant: self.b_only_relevant, b_only_relevant: self.a_only_relevant, ..*self }
    }
}

/// Tabulates the pairs. Fails on an empty set.
pub fn confusion_counts(paired: &PairedLabelSet) -> Result<ConfusionCounts> {
    if paired.is_empty() {
        return Err(Error::Domain("cannot tabulate an empty pair set".into()));
    }
    let mut cc = ConfusionCounts::default();
    for p in paired.pairs() {
        cc.add(p.label_a, p.label_b);
    }
    Ok(cc)
}

/// Fraction of pairs with identical labels.
pub fn raw_agreement(cc: &ConfusionCounts) -> Result<f64> {
    let n = cc.total();
    if n == 0 {
        return Err(Error::Domain("raw agreement of zero pairs".into()));
    }
    Ok((cc.both_relevant + cc.both_nonrelevant) as f64 / n as f64)
}

/// Cohen's kappa, or why it does not exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Kappa {
    Defined(f64),
    /// Chance agreement is 1: both raters used a single, identical label.
    Undefined,
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Defined(k) => Some(k),
            Kappa::Undefined => None,
        }
    }
}

/// Cohen's kappa `(p_o - p_e) / (1 - p_e)` with chance agreement taken from
/// the row and column marginals.
///
/// Evaluated as `(n*d - m) / (n^2 - m)` where `d` is the diagonal count and
/// `m` the sum of marginal products, so the only rounding is the final
/// division.
pub fn cohens_kappa(cc: &ConfusionCounts) -> Result<Kappa> {
    let n = cc.total() as u128;
    if n == 0 {
        return Err(Error::Domain("kappa of zero pairs".into()));
    }
    let a_rel = (cc.both_relevant + cc.a_only_relevant) as u128;
    let b_rel = (cc.both_relevant + cc.b_only_relevant) as u128;
    let diagonal = (cc.both_relevant + cc.both_nonrelevant) as u128;
    let marginal = a_rel * b_rel + (n - a_rel) * (n - b_rel);
    let denom = n * n - marginal;
    if denom == 0 {
        return Ok(Kappa::Undefined);
    }
    let numer = (n * diagonal) as i128 - marginal as i128;
    Ok(Kappa::Defined(numer as f64 / denom as f64))
}

/// Document keys of the four agreement cells, as (doc_id, topic).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Quadrants {
    pub both_relevant: BTreeSet<(String, String)>,
    pub a_only: BTreeSet<(String, String)>,
    pub b_only: BTreeSet<(String, String)>,
    pub both_nonrelevant: BTreeSet<(String, String)>,
}

impl Quadrants {
    /// Keys where exactly one model said Relevant.
    pub fn disagreement(&self) -> BTreeSet<(String, String)> {
        self.a_only.union(&self.b_only).cloned().collect()
    }
}

pub fn partition_quadrants(paired: &PairedLabelSet) -> Quadrants {
    let mut q = Quadrants::default();
    for p in paired.pairs() {
        let key = (p.doc_id.clone(), p.topic.clone());
        let cell = match (p.label_a, p.label_b) {
            (Label::Relevant, Label::Relevant) => &mut q.both_relevant,
            (Label::Relevant, Label::NonRelevant) => &mut q.a_only,
            (Label::NonRelevant, Label::Relevant) => &mut q.b_only,
            (Label::NonRelevant, Label::NonRelevant) => &mut q.both_nonrelevant,
        };
        cell.insert(key);
    }
    q
}

/// Cell proportions in the same order as [`ConfusionCounts`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrantFractions {
    pub both_relevant: f64,
    pub a_only_relevant: f64,
    pub b_only_relevant: f64,
    pub both_nonrelevant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub model_a: String,
    pub model_b: String,
    pub n_pairs: u64,
    pub counts: ConfusionCounts,
    pub raw_agreement: f64,
    pub kappa: Kappa,
    pub quadrant_fractions: QuadrantFractions,
}

pub fn agreement_report(paired: &PairedLabelSet) -> Result<AgreementReport> {
    let counts = confusion_counts(paired)?;
    let n = counts.total() as f64;
    Ok(AgreementReport {
        model_a: paired.model_a.clone(),
        model_b: paired.model_b.clone(),
        n_pairs: counts.total(),
        counts,
        raw_agreement: raw_agreement(&counts)?,
        kappa: cohens_kappa(&counts)?,
        quadrant_fractions: QuadrantFractions {
            both_relevant: counts.both_relevant as f64 / n,
            a_only_relevant: counts.a_only_relevant as f64 / n,
            b_only_relevant: counts.b_only_relevant as f64 / n,
            both_nonrelevant: counts.both_nonrelevant as f64 / n,
        },
    })
}
