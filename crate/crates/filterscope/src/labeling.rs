//! Resumable, concurrent labeling of a corpus against one backend.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use filterscope_core::corpus::Corpus;
use filterscope_core::labeling::{
    build_prompt, GenerationConfig, LabelOutcome, LabelRecord, PromptMessages, PromptTemplate, TopicSpec,
};
use serde::Serialize;

use crate::backend::{complete_with_retry, ChatBackend, RetryPolicy};
use crate::{Error, Result};

/// Append-only JSONL store of label records for one model.
///
/// Records are keyed by (doc_id, topic). Failed records found on open are
/// dropped (the file is rewritten without them) so their keys are retried; a
/// truncated final line left by a crash is discarded the same way.
pub struct ResumeStore {
    path: PathBuf,
    file: Mutex<File>,
    records: Vec<LabelRecord>,
    keys: BTreeSet<(String, String)>,
}

impl ResumeStore {
    pub fn open(path: &Path, model_id: &str) -> Result<Self> {
        let mut records = Vec::new();
        let mut rewrite = false;
        if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let lines: Vec<&str> = text.lines().collect();
            let mut seen = BTreeSet::new();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let record: LabelRecord = match serde_json::from_str(line) {
                    Ok(r) => r,
                    Err(_) if i + 1 == lines.len() => {
                        rewrite = true;
                        continue;
                    }
                    Err(e) => {
                        return Err(Error::Validation(format!("{}:{}: {e}", path.display(), i + 1)));
                    }
                };
                if record.model_id != model_id {
                    return Err(Error::Validation(format!(
                        "{}:{}: record for model {:?} in the store of {model_id:?}",
                        path.display(),
                        i + 1,
                        record.model_id
                    )));
                }
                if record.label == LabelOutcome::Failed {
                    rewrite = true;
                    continue;
                }
                if !seen.insert((record.doc_id.clone(), record.topic.clone())) {
                    return Err(Error::Validation(format!(
                        "{}:{}: duplicate record for ({:?}, {:?})",
                        path.display(),
                        i + 1,
                        record.doc_id,
                        record.topic
                    )));
                }
                records.push(record);
            }
        }
        if rewrite {
            let tmp = path.with_extension("jsonl.tmp");
            crate::labels_io::write_labels(&records, &tmp)?;
            fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
        let keys = records.iter().map(|r| (r.doc_id.clone(), r.topic.clone())).collect();
        Ok(Self { path: path.to_path_buf(), file: Mutex::new(file), records, keys })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Records present when the store was opened.
    pub fn existing(&self) -> &[LabelRecord] {
        &self.records
    }

    pub fn contains(&self, doc_id: &str, topic: &str) -> bool {
        self.keys.contains(&(doc_id.to_string(), topic.to_string()))
    }

    fn append(&self, record: &LabelRecord) -> Result<()> {
        let line = serde_json::to_string(record)?;
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(file, "{line}").and_then(|_| file.flush()).map_err(|e| Error::io(&self.path, e))
    }
}

/// Everything `label_corpus` needs besides the backend and store.
pub struct LabelJob<'a> {
    pub corpus: &'a Corpus,
    pub topics: &'a [TopicSpec],
    pub template: &'a PromptTemplate,
    pub generation: GenerationConfig,
    pub concurrency: usize,
    pub retry: RetryPolicy,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LabelSummary {
    pub model_id: String,
    /// (doc, topic) pairs in scope.
    pub requested: usize,
    pub already_done: usize,
    pub labeled: usize,
    pub unparseable: usize,
    pub failed: usize,
    pub backend_calls: usize,
}

/// Labels every (document, topic) pair where the document is tagged with the
/// topic and the store has no record yet. New records are appended to the
/// store as they complete and returned sorted by (doc_id, topic).
///
/// Transient backend errors are retried per `job.retry`, then stored as
/// Failed. Unparseable responses are stored as such and not retried.
pub fn label_corpus(
    job: &LabelJob<'_>,
    backend: &dyn ChatBackend,
    store: &ResumeStore,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<(Vec<LabelRecord>, LabelSummary)> {
    job.generation.validate()?;
    if job.concurrency == 0 {
        return Err(Error::Config("concurrency must be at least 1".into()));
    }
    let model_id = backend.model_id();

    let mut requested = 0;
    let mut work: Vec<(&str, &str, PromptMessages)> = Vec::new();
    for doc in job.corpus.iter() {
        for topic in job.topics.iter().filter(|t| doc.topics.contains(&t.id)) {
            requested += 1;
            if store.contains(&doc.doc_id, &topic.id) {
                continue;
            }
            work.push((&doc.doc_id, &topic.id, build_prompt(doc, topic, job.template)?));
        }
    }

    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let calls = AtomicUsize::new(0);
    let results: Mutex<Vec<LabelRecord>> = Mutex::new(Vec::with_capacity(work.len()));
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let workers = job.concurrency.min(work.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if first_error.lock().map(|e| e.is_some()).unwrap_or(true) {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((doc_id, topic, prompt)) = work.get(i) else {
                    return;
                };
                let (outcome, attempts) = complete_with_retry(backend, prompt, &job.generation, &job.retry);
                calls.fetch_add(attempts as usize, Ordering::SeqCst);
                let record = match outcome {
                    Ok(raw) => LabelRecord::from_response(doc_id, topic, model_id, &raw),
                    Err(err) => LabelRecord::failed(doc_id, topic, model_id, &err.to_string()),
                };
                if let Err(e) = store.append(&record) {
                    first_error.lock().unwrap_or_else(|p| p.into_inner()).get_or_insert(e);
                    return;
                }
                results.lock().unwrap_or_else(|p| p.into_inner()).push(record);
                let n = done.fetch_add(1, Ordering::SeqCst) + 1;
                if let Some(report) = progress {
                    report(n, work.len());
                }
            });
        }
    });

    if let Some(e) = first_error.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }
    let mut records = results.into_inner().unwrap_or_else(|p| p.into_inner());
    records.sort_by(|a, b| a.key().cmp(&b.key()));

    let mut summary = LabelSummary {
        model_id: model_id.to_string(),
        requested,
        already_done: requested - work.len(),
        backend_calls: calls.into_inner(),
        ..Default::default()
    };
    for r in &records {
        match r.label {
            LabelOutcome::Relevant | LabelOutcome::NonRelevant => summary.labeled += 1,
            LabelOutcome::Unparseable => summary.unparseable += 1,
            LabelOutcome::Failed => summary.failed += 1,
        }
    }
    Ok((records, summary))
}

/// All records of a store file, deduplicated by key with later lines winning,
/// sorted by (doc_id, topic).
pub fn load_label_set(path: &Path) -> Result<Vec<LabelRecord>> {
    let mut by_key: BTreeMap<(String, String), LabelRecord> = BTreeMap::new();
    for r in crate::labels_io::read_labels(path)? {
        by_key.insert((r.doc_id.clone(), r.topic.clone()), r);
    }
    Ok(by_key.into_values().collect())
}
