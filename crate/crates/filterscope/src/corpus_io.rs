//! Corpus files: JSONL (canonical) and CSV with the same header names.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use filterscope_core::corpus::{Corpus, CorpusBuilder, Document, DropCounts, Provenance, RawRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guesses from the file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

const CLEANING_POLICY: &str = "nfc+whitespace-collapse+control-strip/v1;dedup=first-wins";

/// Short digest of the ingestion settings, recorded in corpus provenance.
pub fn ingestion_config_hash(format: CorpusFormat) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_string(&format).unwrap_or_default().as_bytes());
    h.update(b"\n");
    h.update(CLEANING_POLICY.as_bytes());
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub source: String,
    pub format: CorpusFormat,
    pub config_hash: String,
    pub records: usize,
    pub kept: usize,
    pub dropped: DropCounts,
    pub malformed: Vec<RecordError>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    doc_id: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(rename = "abstract")]
    abstract_text: Option<String>,
    #[serde(default)]
    topics: Option<String>,
    #[serde(default)]
    year: Option<i32>,
    #[serde(default)]
    citations: Option<u64>,
}

impl From<CsvRow> for RawRecord {
    fn from(row: CsvRow) -> Self {
        RawRecord {
            doc_id: row.doc_id,
            title: row.title,
            abstract_text: row.abstract_text,
            // Topics are `;`-separated inside the CSV cell.
            topics: row
                .topics
                .unwrap_or_default()
                .split(';')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(String::from)
                .collect(),
            year: row.year,
            citations: row.citations,
        }
    }
}

/// Reads, cleans and deduplicates a corpus file.
///
/// Malformed records are listed in the report. The call only fails when the
/// file cannot be read, a CSV header lacks a required column, or every
/// record is malformed.
pub fn ingest_corpus(path: &Path, format: CorpusFormat) -> Result<(Corpus, IngestReport)> {
    let mut builder = CorpusBuilder::new();
    let mut malformed = Vec::new();
    let mut records = 0usize;

    match format {
        CorpusFormat::Jsonl => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                records += 1;
                match serde_json::from_str::<RawRecord>(&line) {
                    Ok(rec) => {
                        builder.push(rec);
                    }
                    Err(e) => malformed.push(RecordError { line: i as u64 + 1, message: e.to_string() }),
                }
            }
        }
        CorpusFormat::Csv => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(file);
            let headers = reader
                .headers()
                .map_err(|e| Error::Validation(format!("{}: unreadable CSV header: {e}", path.display())))?
                .clone();
            for required in ["doc_id", "abstract"] {
                if !headers.iter().any(|h| h == required) && !(headers.is_empty() && records == 0) {
                    return Err(Error::Validation(format!(
                        "{}: CSV header lacks required column `{required}`",
                        path.display()
                    )));
                }
            }
            for row in reader.deserialize::<CsvRow>() {
                records += 1;
                match row {
                    Ok(row) => {
                        builder.push(row.into());
                    }
                    Err(e) => {
                        let line = e.position().map_or(0, |p| p.line());
                        malformed.push(RecordError { line, message: e.to_string() });
                    }
                }
            }
        }
    }

    if records > 0 && malformed.len() == records {
        return Err(Error::Validation(format!(
            "{}: all {records} records are malformed (first at line {}: {})",
            path.display(),
            malformed[0].line,
            malformed[0].message
        )));
    }

    let config_hash = ingestion_config_hash(format);
    let provenance = Provenance { source: path.display().to_string(), config_hash: config_hash.clone() };
    let (corpus, dropped) = builder.finish(provenance);
    let report = IngestReport {
        source: path.display().to_string(),
        format,
        config_hash,
        records,
        kept: corpus.len(),
        dropped,
        malformed,
    };
    Ok((corpus, report))
}

/// Canonical JSONL rendering: one document per line, LF endings.
pub fn corpus_to_jsonl(corpus: &Corpus) -> String {
    let mut out = String::new();
    for doc in corpus {
        out.push_str(&serde_json::to_string(doc).expect("documents serialize"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(corpus_to_jsonl(corpus).as_bytes()).map_err(|e| Error::io(path, e))
}

/// Loads a canonical corpus file strictly: any bad line is an error.
pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(line).map_err(|e| Error::Validation(format!("{}:{}: {e}", path.display(), i + 1)))?;
        docs.push(doc);
    }
    let provenance =
        Provenance { source: path.display().to_string(), config_hash: ingestion_config_hash(CorpusFormat::Jsonl) };
    Ok(Corpus::from_documents(docs, provenance)?)
}
