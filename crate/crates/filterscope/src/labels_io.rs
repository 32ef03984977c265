//! Label JSONL and paired-label JSONL files.

use std::fs;
use std::io::Write;
use std::path::Path;

use filterscope_core::labeling::{Label, LabelPair, LabelRecord, PairedLabelSet};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Validation(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Reads a label file. A missing file is an empty set.
pub fn read_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_jsonl(path)
}

pub fn write_labels(records: &[LabelRecord], path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct PairLine {
    doc_id: String,
    topic: String,
    model_a: String,
    model_b: String,
    label_a: Label,
    label_b: Label,
}

pub fn write_paired(paired: &PairedLabelSet, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for p in paired.pairs() {
        let line = PairLine {
            doc_id: p.doc_id.clone(),
            topic: p.topic.clone(),
            model_a: paired.model_a.clone(),
            model_b: paired.model_b.clone(),
            label_a: p.label_a,
            label_b: p.label_b,
        };
        writeln!(f, "{}", serde_json::to_string(&line)?).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_paired(path: &Path) -> Result<PairedLabelSet> {
    let lines: Vec<PairLine> = read_jsonl(path)?;
    let (model_a, model_b) = match lines.first() {
        Some(l) => (l.model_a.clone(), l.model_b.clone()),
        None => (String::new(), String::new()),
    };
    if let Some(l) = lines.iter().find(|l| l.model_a != model_a || l.model_b != model_b) {
        return Err(Error::Validation(format!(
            "{}: mixed model pairs ({}, {}) and ({}, {})",
            path.display(),
            model_a,
            model_b,
            l.model_a,
            l.model_b
        )));
    }
    let pairs = lines
        .into_iter()
        .map(|l| LabelPair { doc_id: l.doc_id, topic: l.topic, label_a: l.label_a, label_b: l.label_b })
        .collect();
    Ok(PairedLabelSet::new(model_a, model_b, pairs)?)
}
