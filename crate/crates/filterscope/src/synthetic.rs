//! Synthetic corpus with two pseudo-model filters whose disagreements are
//! driven by planted vocabularies.

use std::collections::BTreeSet;

use filterscope_core::corpus::{Corpus, Document, Provenance};
use filterscope_core::labeling::{LabelRecord, TopicSpec};
use filterscope_core::lexical::is_stopword;
use filterscope_core::seed;
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use serde::{Deserialize, Serialize};

use crate::Result;

pub const PLANTED_A: [&str; 10] = [
    "microfinance",
    "remittance",
    "livelihood",
    "smallholder",
    "informal",
    "welfare",
    "subsidy",
    "household",
    "vulnerability",
    "destitution",
];

pub const PLANTED_B: [&str; 10] = [
    "photovoltaic",
    "electrolyzer",
    "perovskite",
    "inverter",
    "turbine",
    "lithium",
    "anode",
    "hydrogen",
    "battery",
    "microgrid",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    /// Fraction of documents on which both filters agree.
    pub concordance: f64,
    /// Fraction of agreeing documents that both call Relevant.
    pub both_relevant_share: f64,
    pub background_size: usize,
    pub doc_len: usize,
    /// Planted terms inserted into each disagreement document.
    pub planted_per_doc: usize,
    /// Chance that an agreeing document carries one planted term anyway.
    pub leak_rate: f64,
    pub topic: String,
    pub model_a: String,
    pub model_b: String,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_docs: 2000,
            concordance: 0.8,
            both_relevant_share: 0.7,
            background_size: 800,
            doc_len: 60,
            planted_per_doc: 4,
            leak_rate: 0.05,
            topic: "7".into(),
            model_a: "filter-a".into(),
            model_b: "filter-b".into(),
            seed: 20240917,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    BothRelevant,
    BothNonRelevant,
    AOnly,
    BOnly,
}

pub struct SyntheticData {
    pub corpus: Corpus,
    pub topic: TopicSpec,
    pub labels_a: Vec<LabelRecord>,
    pub labels_b: Vec<LabelRecord>,
    pub roles: Vec<Role>,
    pub planted_a: Vec<String>,
    pub planted_b: Vec<String>,
}

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

fn background_vocabulary(rng: &mut impl Rng, size: usize) -> Vec<String> {
    let planted: BTreeSet<&str> = PLANTED_A.iter().chain(&PLANTED_B).copied().collect();
    let mut seen = BTreeSet::new();
    let mut words = Vec::with_capacity(size);
    while words.len() < size {
        let syllables = rng.gen_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
            w.push_str(VOWELS[rng.gen_range(0..VOWELS.len())]);
        }
        if is_stopword(&w) || planted.contains(w.as_str()) || !seen.insert(w.clone()) {
            continue;
        }
        words.push(w);
    }
    words
}

fn response(relevant: bool) -> String {
    let label = if relevant { "Relevant" } else { "Non-Relevant" };
    format!("Label: {label}\nJustification: synthetic decision.\nContribution type: none")
}

/// Generates the corpus and both label sets. Role counts are exact:
/// `round(n * (1 - concordance))` disagreements split evenly between the
/// two directions, the rest split by `both_relevant_share`.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let mut rng = seed::rng(spec.seed);
    let vocab = background_vocabulary(&mut rng, spec.background_size);
    let zipf = WeightedIndex::new((0..vocab.len()).map(|r| 1.0 / (r as f64 + 2.0)))
        .expect("background vocabulary is non-empty");

    let n = spec.n_docs;
    let n_disagree = (n as f64 * (1.0 - spec.concordance)).round() as usize;
    let n_a = n_disagree / 2;
    let n_b = n_disagree - n_a;
    let n_rel = ((n - n_disagree) as f64 * spec.both_relevant_share).round() as usize;
    let mut roles: Vec<Role> = std::iter::repeat_n(Role::AOnly, n_a)
        .chain(std::iter::repeat_n(Role::BOnly, n_b))
        .chain(std::iter::repeat_n(Role::BothRelevant, n_rel))
        .chain(std::iter::repeat_n(Role::BothNonRelevant, n - n_disagree - n_rel))
        .collect();
    roles.shuffle(&mut rng);

    let topic = TopicSpec {
        id: spec.topic.clone(),
        name: "Affordable and clean energy".into(),
        targets: vec![
            "Ensure universal access to affordable, reliable and modern energy services".into(),
            "Increase substantially the share of renewable energy in the global energy mix".into(),
        ],
    };
    let width = n.max(1).to_string().len();
    let mut docs = Vec::with_capacity(n);
    let mut labels_a = Vec::with_capacity(n);
    let mut labels_b = Vec::with_capacity(n);
    for (i, role) in roles.iter().enumerate() {
        let mut tokens: Vec<&str> = (0..spec.doc_len).map(|_| vocab[zipf.sample(&mut rng)].as_str()).collect();
        let planted: Vec<&str> = match role {
            Role::AOnly => PLANTED_A.choose_multiple(&mut rng, spec.planted_per_doc).copied().collect(),
            Role::BOnly => PLANTED_B.choose_multiple(&mut rng, spec.planted_per_doc).copied().collect(),
            _ if rng.gen_bool(spec.leak_rate) => {
                let side = if rng.gen_bool(0.5) { &PLANTED_A } else { &PLANTED_B };
                vec![side[rng.gen_range(0..side.len())]]
            }
            _ => Vec::new(),
        };
        for w in planted {
            let at = rng.gen_range(0..=tokens.len());
            tokens.insert(at, w);
        }
        let doc_id = format!("syn-{i:0width$}");
        let (rel_a, rel_b) = match role {
            Role::BothRelevant => (true, true),
            Role::BothNonRelevant => (false, false),
            Role::AOnly => (true, false),
            Role::BOnly => (false, true),
        };
        labels_a.push(LabelRecord::from_response(&doc_id, &spec.topic, &spec.model_a, &response(rel_a)));
        labels_b.push(LabelRecord::from_response(&doc_id, &spec.topic, &spec.model_b, &response(rel_b)));
        docs.push(Document {
            doc_id,
            title: format!("Synthetic study {i}"),
            abstract_text: tokens.join(" "),
            topics: [spec.topic.clone()].into(),
            year: Some(2015 + (i % 9) as i32),
            citations: None,
        });
    }
    let corpus = Corpus::from_documents(
        docs,
        Provenance { source: "synthetic".into(), config_hash: format!("seed={}", spec.seed) },
    )?;
    Ok(SyntheticData {
        corpus,
        topic,
        labels_a,
        labels_b,
        roles,
        planted_a: PLANTED_A.iter().map(|s| s.to_string()).collect(),
        planted_b: PLANTED_B.iter().map(|s| s.to_string()).collect(),
    })
}
