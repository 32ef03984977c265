//! Documents, corpora, text cleaning, and stratified splitting.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::{seed, Error, Result};

/// Topic identifier, e.g. an SDG number rendered as a string.
pub type TopicId = String;

/// One abstract, the unit of labeling and retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub topics: BTreeSet<TopicId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citations: Option<u64>,
}

/// Where a corpus came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub config_hash: String,
}

/// An ordered, duplicate-free document collection.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    index: BTreeMap<String, usize>,
    pub provenance: Provenance,
}

impl Corpus {
    /// Builds a corpus from documents that are already unique by id.
    pub fn from_documents(documents: Vec<Document>, provenance: Provenance) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, doc) in documents.iter().enumerate() {
            if doc.doc_id.is_empty() {
                return Err(Error::Integrity(format!("document {i} has an empty doc_id")));
            }
            if index.insert(doc.doc_id.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate doc_id {:?}", doc.doc_id)));
            }
        }
        Ok(Self { documents, index, provenance })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.index.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.index.contains_key(doc_id)
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    /// Documents tagged with `topic`, in corpus order.
    pub fn with_topic<'a>(&'a self, topic: &'a str) -> impl Iterator<Item = &'a Document> + 'a {
        self.documents.iter().filter(move |d| d.topics.contains(topic))
    }

    fn subset(&self, keep: impl Fn(&Document) -> bool) -> Corpus {
        let docs: Vec<Document> = self.documents.iter().filter(|d| keep(d)).cloned().collect();
        // Ids were unique in self, so they are unique in any subset.
        Corpus::from_documents(docs, self.provenance.clone()).expect("subset of a valid corpus")
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = core::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}

/// NFC-normalizes `text`, collapses whitespace runs to one space, drops
/// control characters and trims both ends.
pub fn clean_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.nfc() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else if ch.is_control() {
            continue;
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(ch);
        }
    }
    out
}

/// A record as read from disk, before cleaning and validation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    #[serde(default)]
    pub doc_id: Option<String>,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default, rename = "abstract")]
    pub abstract_text: Option<String>,
    #[serde(default)]
    pub topics: Vec<String>,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub citations: Option<u64>,
}

/// Drop counters accumulated while building a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub empty_doc_id: usize,
    pub empty_abstract: usize,
    pub duplicate: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.empty_doc_id + self.empty_abstract + self.duplicate
    }
}

/// Cleans and deduplicates records into a corpus; the first occurrence of a
/// doc_id wins.
#[derive(Debug, Default)]
pub struct CorpusBuilder {
    documents: Vec<Document>,
    seen: BTreeSet<String>,
    drops: DropCounts,
}

impl CorpusBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one record. Returns `true` when it was kept.
    pub fn push(&mut self, record: RawRecord) -> bool {
        let doc_id = record.doc_id.as_deref().map(clean_text).unwrap_or_default();
        if doc_id.is_empty() {
            self.drops.empty_doc_id += 1;
            return false;
        }
        let abstract_text = record.abstract_text.as_deref().map(clean_text).unwrap_or_default();
        if abstract_text.is_empty() {
            self.drops.empty_abstract += 1;
            return false;
        }
        if self.seen.contains(&doc_id) {
            self.drops.duplicate += 1;
            return false;
        }
        self.seen.insert(doc_id.clone());
        let topics = record.topics.iter().map(|t| clean_text(t)).filter(|t| !t.is_empty()).collect();
        self.documents.push(Document {
            doc_id,
            title: record.title.as_deref().map(clean_text).unwrap_or_default(),
            abstract_text,
            topics,
            year: record.year,
            citations: record.citations,
        });
        true
    }

    pub fn drops(&self) -> DropCounts {
        self.drops
    }

    pub fn finish(self, provenance: Provenance) -> (Corpus, DropCounts) {
        let drops = self.drops;
        let corpus = Corpus::from_documents(self.documents, provenance).expect("builder enforces unique non-empty ids");
        (corpus, drops)
    }
}

/// Parameters of a stratified train/test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    /// Name of the label field the split is stratified on (recorded for provenance).
    pub stratify_key: String,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, stratify_key: impl Into<String>, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Domain(format!(
                "train_fraction must lie strictly between 0 and 1, got {train_fraction}"
            )));
        }
        Ok(Self { train_fraction, stratify_key: stratify_key.into(), seed })
    }
}

/// Number of training items for a class of size `n`.
pub fn stratum_train_count(n: usize, train_fraction: f64) -> usize {
    (libm::round(n as f64 * train_fraction) as usize).min(n)
}

/// Splits `corpus` so that every label class keeps `train_fraction` of its
/// members (rounded to the nearest document). Both halves keep corpus order.
pub fn stratified_split(
    corpus: &Corpus,
    labels: &BTreeMap<String, bool>,
    spec: &SplitSpec,
) -> Result<(Corpus, Corpus)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "train_fraction must lie strictly between 0 and 1, got {}",
            spec.train_fraction
        )));
    }
    let mut classes: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
    for doc in corpus {
        let label = labels
            .get(&doc.doc_id)
            .ok_or_else(|| Error::Precondition(format!("no label for doc_id {:?}", doc.doc_id)))?;
        classes[usize::from(*label)].push(doc.doc_id.as_str());
    }

    let mut train_ids = BTreeSet::new();
    for (class, members) in classes.iter_mut().enumerate() {
        let take = stratum_train_count(members.len(), spec.train_fraction);
        let mut rng = seed::rng(seed::for_index(spec.seed, class as u64));
        members.shuffle(&mut rng);
        train_ids.extend(members[..take].iter().map(|id| id.to_string()));
    }

    let train = corpus.subset(|d| train_ids.contains(&d.doc_id));
    let test = corpus.subset(|d| !train_ids.contains(&d.doc_id));
    Ok((train, test))
}
