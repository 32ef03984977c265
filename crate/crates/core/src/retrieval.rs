//! Cosine retrieval over disagreement pools and top-k composition reports.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::domain;
use crate::lexical::{mean_vector, SparseVector, VectorizerModel};
use crate::Result;

/// How a query vector was built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "terms", rename_all = "snake_case")]
pub enum QueryProvenance {
    Centroid,
    RepresentativeTerms(Vec<String>),
}

/// A dense query in the fitted TF-IDF space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryVector {
    weights: Vec<f64>,
    norm: f64,
    pub provenance: QueryProvenance,
}

impl QueryVector {
    /// Fails on zero or non-finite input.
    pub fn new(weights: Vec<f64>, provenance: QueryProvenance) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(domain!("query weights must be finite"));
        }
        let norm = libm::sqrt(weights.iter().map(|w| w * w).sum());
        if norm == 0.0 {
            return Err(domain!("query vector is zero"));
        }
        Ok(Self { weights, norm, provenance })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same direction, every weight multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(domain!("scale factor must be positive and finite"));
        }
        Self::new(self.weights.iter().map(|w| w * factor).collect(), self.provenance.clone())
    }

    pub fn cosine(&self, doc: &SparseVector) -> f64 {
        let doc_norm = doc.norm();
        if doc_norm == 0.0 {
            return 0.0;
        }
        (doc.dot_dense(&self.weights) / (self.norm * doc_norm)).clamp(-1.0, 1.0)
    }
}

/// Mean of the document vectors, not re-normalized.
pub fn centroid_query(vectors: &[SparseVector], dim: usize) -> Result<QueryVector> {
    if vectors.is_empty() {
        return Err(domain!("centroid of an empty slice"));
    }
    QueryVector::new(mean_vector(vectors, dim)?, QueryProvenance::Centroid)
}

/// Query built from the highest-mean terms of a slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeQuery {
    pub query: QueryVector,
    pub terms: Vec<String>,
    /// Set when fewer terms than requested were available.
    pub clamped: bool,
}

/// Picks the `n_terms` terms with the highest mean TF-IDF over `vectors`
/// (ties in lexicographic order) and vectorizes them as one synthetic
/// document through `model`.
pub fn representative_query(
    model: &VectorizerModel,
    vectors: &[SparseVector],
    n_terms: usize,
) -> Result<RepresentativeQuery> {
    if n_terms < 1 {
        return Err(domain!("n_terms must be at least 1"));
    }
    if vectors.is_empty() {
        return Err(domain!("representative terms of an empty slice"));
    }
    let means = mean_vector(vectors, model.dim())?;
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&x, &y| means[y].total_cmp(&means[x]).then(x.cmp(&y)));
    let clamped = n_terms > order.len();
    order.truncate(n_terms);
    let terms: Vec<String> = order.iter().map(|&i| model.vocabulary()[i].clone()).collect();
    let doc = model.transform_tokens(terms.iter().map(String::as_str));
    let query = QueryVector::new(doc.to_dense(model.dim()), QueryProvenance::RepresentativeTerms(terms.clone()))?;
    Ok(RepresentativeQuery { query, terms, clamped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub doc_id: String,
    pub score: f64,
}

/// Scores every document and sorts by descending cosine, ties by ascending
/// doc_id. Zero-vector documents score 0 and come after all others.
pub fn cosine_rank<'a, I>(query: &QueryVector, docs: I) -> Vec<Scored>
where
    I: IntoIterator<Item = (&'a str, &'a SparseVector)>,
{
    let mut scored: Vec<(bool, Scored)> =
        docs.into_iter().map(|(id, v)| (v.is_empty(), Scored { doc_id: id.into(), score: query.cosine(v) })).collect();
    scored.sort_by(|(za, a), (zb, b)| {
        za.cmp(zb).then_with(|| b.score.total_cmp(&a.score)).then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    scored.into_iter().map(|(_, s)| s).collect()
}

/// The first `k` ranked entries whose doc_id is in `relevant`.
pub fn filtered_topk(ranked: &[Scored], relevant: &BTreeSet<String>, k: usize) -> Result<Vec<Scored>> {
    if k < 1 {
        return Err(domain!("k must be at least 1"));
    }
    Ok(ranked.iter().filter(|s| relevant.contains(&s.doc_id)).take(k).cloned().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMethod {
    Centroid,
    Query,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

/// Composition of two top-k lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub method: RetrievalMethod,
    pub k: usize,
    pub a_only: usize,
    pub b_only: usize,
    pub both: usize,
    pub a_list: Vec<RankedEntry>,
    pub b_list: Vec<RankedEntry>,
}

fn with_ranks(list: &[Scored]) -> Vec<RankedEntry> {
    list.iter()
        .enumerate()
        .map(|(i, s)| RankedEntry { doc_id: s.doc_id.clone(), score: s.score, rank: i + 1 })
        .collect()
}

pub fn overlap_report(method: RetrievalMethod, k: usize, topk_a: &[Scored], topk_b: &[Scored]) -> OverlapReport {
    let a: BTreeSet<&str> = topk_a.iter().map(|s| s.doc_id.as_str()).collect();
    let b: BTreeSet<&str> = topk_b.iter().map(|s| s.doc_id.as_str()).collect();
    let both = a.intersection(&b).count();
    OverlapReport {
        method,
        k,
        a_only: a.len() - both,
        b_only: b.len() - both,
        both,
        a_list: with_ranks(topk_a),
        b_list: with_ranks(topk_b),
    }
}
