use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::sparse::SparseVector;
use super::tokenize::{stopwords, tokenize};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopwordSet {
    /// The shipped 318-word English list.
    EnglishV1,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenPattern {
    /// Lowercased alphanumeric runs of two or more characters.
    AlnumMin2,
}

/// Which documents the vocabulary is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScope {
    /// Every document in the corpus, across topics.
    #[default]
    FullCorpus,
    /// The union of both disagreement subsets of the current topic.
    CombinedDisagreement,
    /// Each disagreement subset on its own; for contrast purposes the two
    /// vocabularies are merged into one shared space.
    PerSubset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizerConfig {
    /// Minimum absolute document frequency.
    pub min_df: u64,
    /// Maximum document frequency as a fraction of the fitted documents.
    pub max_df: f64,
    pub stopwords: StopwordSet,
    pub token_pattern: TokenPattern,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        Self { min_df: 5, max_df: 0.95, stopwords: StopwordSet::EnglishV1, token_pattern: TokenPattern::AlnumMin2 }
    }
}

impl VectorizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_df == 0 {
            return Err(Error::Domain("min_df must be at least 1".into()));
        }
        if !(self.max_df > 0.0 && self.max_df <= 1.0) {
            return Err(Error::Domain(format!("max_df must lie in (0, 1], got {}", self.max_df)));
        }
        Ok(())
    }
}

/// Fitted vocabulary with smoothed inverse document frequencies.
///
/// Terms are stored in lexicographic order, so a term's index is its rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizerModel {
    vocabulary: Vec<String>,
    document_frequency: Vec<u64>,
    idf: Vec<f64>,
    n_documents: u64,
    config: VectorizerConfig,
}

impl VectorizerModel {
    /// Fits on `documents`. Keeps terms with `min_df <= df <= floor(max_df * N)`
    /// that are not stopwords; `idf(t) = ln((1 + N) / (1 + df)) + 1`.
    pub fn fit<'a, I>(documents: I, config: &VectorizerConfig) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        config.validate()?;
        let stop: BTreeSet<&str> = match config.stopwords {
            StopwordSet::EnglishV1 => stopwords().collect(),
            StopwordSet::None => BTreeSet::new(),
        };

        let mut df: BTreeMap<String, u64> = BTreeMap::new();
        let mut n_documents = 0u64;
        for doc in documents {
            n_documents += 1;
            let distinct: BTreeSet<String> = tokenize(doc).into_iter().collect();
            for term in distinct {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        if n_documents == 0 {
            return Err(Error::Fit("cannot fit on zero documents".into()));
        }

        let max_count = libm::floor(config.max_df * n_documents as f64) as u64;
        let n = n_documents as f64;
        let mut vocabulary = Vec::new();
        let mut document_frequency = Vec::new();
        let mut idf = Vec::new();
        for (term, count) in df {
            if count < config.min_df || count > max_count || stop.contains(term.as_str()) {
                continue;
            }
            idf.push(libm::log((1.0 + n) / (1.0 + count as f64)) + 1.0);
            document_frequency.push(count);
            vocabulary.push(term);
        }
        if vocabulary.is_empty() {
            return Err(Error::Fit(format!(
                "no term survives min_df={} max_df={} over {n_documents} documents",
                config.min_df, config.max_df
            )));
        }
        Ok(Self { vocabulary, document_frequency, idf, n_documents, config: config.clone() })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn document_frequency(&self) -> &[u64] {
        &self.document_frequency
    }

    pub fn n_documents(&self) -> u64 {
        self.n_documents
    }

    pub fn config(&self) -> &VectorizerConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.vocabulary.binary_search_by(|t| t.as_str().cmp(term)).ok().map(|i| i as u32)
    }

    pub fn term(&self, index: u32) -> Option<&str> {
        self.vocabulary.get(index as usize).map(String::as_str)
    }

    /// Raw counts times idf, L2-normalized. Out-of-vocabulary tokens are
    /// ignored; a document without vocabulary terms maps to the zero vector.
    pub fn transform(&self, text: &str) -> SparseVector {
        self.transform_tokens(tokenize(text).iter().map(String::as_str))
    }

    pub fn transform_tokens<'a, I>(&self, tokens: I) -> SparseVector
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
        for tok in tokens {
            if let Some(i) = self.index_of(tok) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let (indices, values): (Vec<u32>, Vec<f64>) =
            counts.into_iter().map(|(i, c)| (i, c as f64 * self.idf[i as usize])).unzip();
        SparseVector::new(indices, values).expect("BTreeMap keys are increasing and weights finite").normalized()
    }

    /// Union of the vocabularies of several models, re-weighted with the
    /// mean idf of each term over the models that contain it.
    pub fn merged(models: &[VectorizerModel]) -> Result<Self> {
        let first = models.first().ok_or_else(|| Error::Fit("nothing to merge".into()))?;
        let mut terms: BTreeMap<&str, (u64, f64, u64)> = BTreeMap::new();
        for m in models {
            for ((t, &df), &idf) in m.vocabulary.iter().zip(&m.document_frequency).zip(&m.idf) {
                let e = terms.entry(t.as_str()).or_insert((0, 0.0, 0));
                e.0 += df;
                e.1 += idf;
                e.2 += 1;
            }
        }
        let mut out = Self {
            vocabulary: Vec::with_capacity(terms.len()),
            document_frequency: Vec::with_capacity(terms.len()),
            idf: Vec::with_capacity(terms.len()),
            n_documents: models.iter().map(|m| m.n_documents).sum(),
            config: first.config.clone(),
        };
        for (t, (df, idf_sum, k)) in terms {
            out.vocabulary.push(t.into());
            out.document_frequency.push(df);
            out.idf.push(idf_sum / k as f64);
        }
        Ok(out)
    }
}
