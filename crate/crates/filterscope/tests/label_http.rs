use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::Value;

/// Minimal chat-completions endpoint. Abstracts mentioning "solar" are
/// Relevant. The first `fail_first` requests get a 503.
struct MockServer {
    port: u16,
    calls: Arc<AtomicUsize>,
}

impl MockServer {
    fn start(fail_first: usize) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        let calls = Arc::new(AtomicUsize::new(0));
        let counter = calls.clone();
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let counter = counter.clone();
                thread::spawn(move || serve(stream, &counter, fail_first));
            }
        });
        Self { port, calls }
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn url(&self) -> String {
        format!("http://127.0.0.1:{}/v1", self.port)
    }
}

fn serve(stream: TcpStream, calls: &AtomicUsize, fail_first: usize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut length = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    let n = calls.fetch_add(1, Ordering::SeqCst);
    let request: Value = serde_json::from_slice(&body).unwrap();
    let user = request["messages"][1]["content"].as_str().unwrap_or_default().to_lowercase();

    let (status, payload) = if n < fail_first {
        ("503 Service Unavailable", "{\"error\":\"busy\"}".to_string())
    } else {
        let label = if user.contains("solar") { "Relevant" } else { "Non-Relevant" };
        let content = format!("Label: {label}\nJustification: mock.\nContribution type: none");
        ("200 OK", serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string())
    };
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
}

const DOCS: [(&str, &str); 5] = [
    ("d1", "Solar home systems in rural Kenya."),
    ("d2", "Microfinance and household savings."),
    ("d3", "Solar irrigation pumps for smallholders."),
    ("d4", "Wind turbine blade fatigue."),
    ("d5", "Clean cooking stoves and indoor air."),
];

fn setup(dir: &Path, base_url: &str) {
    let corpus: String = DOCS
        .iter()
        .map(|(id, abs)| format!("{{\"doc_id\":\"{id}\",\"title\":\"\",\"abstract\":\"{abs}\",\"topics\":[\"7\"]}}\n"))
        .collect();
    fs::write(dir.join("corpus.jsonl"), corpus).unwrap();
    let config = format!(
        r#"
corpus = "{corpus}"

[[topics]]
id = "7"
name = "Affordable and clean energy"
targets = ["Ensure universal access to affordable, reliable and modern energy services"]

[[backends]]
name = "mock"
base_url = "{base_url}"
model = "mock-model"
timeout_secs = 5

[retry]
base_ms = 1
factor = 2.0
max_attempts = 3
"#,
        corpus = dir.join("corpus.jsonl").display()
    );
    fs::write(dir.join("config.toml"), config).unwrap();
}

fn label(dir: &Path, out: &str, concurrency: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_filterscope"))
        .args(["label", "--config", dir.join("config.toml").to_str().unwrap(), "--backend", "mock"])
        .args(["--out", dir.join(out).to_str().unwrap(), "--concurrency", &concurrency.to_string()])
        .output()
        .unwrap()
}

fn records(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn keyed(path: &Path) -> BTreeSet<(String, String, String)> {
    records(path)
        .iter()
        .map(|r| {
            (
                r["doc_id"].as_str().unwrap().into(),
                r["topic"].as_str().unwrap().into(),
                r["label"].as_str().unwrap().into(),
            )
        })
        .collect()
}

#[test]
fn labels_every_document_once_and_resumes() {
    let server = MockServer::start(0);
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), &server.url());

    let o = label(dir.path(), "labels.jsonl", 2);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(server.calls(), 5);
    let path = dir.path().join("labels.jsonl");
    let recs = records(&path);
    assert_eq!(recs.len(), 5);
    assert!(recs.iter().all(|r| r["model_id"] == "mock"));
    let relevant: BTreeSet<&str> =
        recs.iter().filter(|r| r["label"] == "relevant").map(|r| r["doc_id"].as_str().unwrap()).collect();
    assert_eq!(relevant, BTreeSet::from(["d1", "d3"]));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["labeled"], 5);

    // Nothing left to do.
    let o = label(dir.path(), "labels.jsonl", 2);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(server.calls(), 5);
    assert_eq!(records(&path).len(), 5);

    // Simulate an interrupted run: two complete lines and a torn third.
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    fs::write(&path, format!("{}\n{}\n{}", lines[0], lines[1], &lines[2][..lines[2].len() / 2])).unwrap();
    let o = label(dir.path(), "labels.jsonl", 2);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(server.calls(), 8);
    let recs = records(&path);
    assert_eq!(recs.len(), 5);
    let ids: BTreeSet<&str> = recs.iter().map(|r| r["doc_id"].as_str().unwrap()).collect();
    assert_eq!(ids.len(), 5);
}

#[test]
fn concurrency_does_not_change_labels() {
    let server = MockServer::start(0);
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), &server.url());
    assert_eq!(label(dir.path(), "one.jsonl", 1).status.code(), Some(0));
    assert_eq!(label(dir.path(), "eight.jsonl", 8).status.code(), Some(0));
    assert_eq!(keyed(&dir.path().join("one.jsonl")), keyed(&dir.path().join("eight.jsonl")));
    assert_eq!(server.calls(), 10);
}

#[test]
fn transient_errors_are_retried() {
    let server = MockServer::start(2);
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), &server.url());
    let o = label(dir.path(), "labels.jsonl", 1);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(server.calls(), 7);
    assert!(records(&dir.path().join("labels.jsonl")).iter().all(|r| r["label"] != "failed"));
}

#[test]
fn unreachable_backend_records_failures_and_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // Nothing listens on port 1.
    setup(dir.path(), "http://127.0.0.1:1/v1");
    let o = label(dir.path(), "labels.jsonl", 4);
    assert_eq!(o.status.code(), Some(3));
    let recs = records(&dir.path().join("labels.jsonl"));
    assert_eq!(recs.len(), 5);
    assert!(recs.iter().all(|r| r["label"] == "failed"));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["failed"], 5);
    assert_eq!(summary["backend_calls"], 15);

    // A later run against a live backend retries exactly the failed pairs.
    let server = MockServer::start(0);
    setup(dir.path(), &server.url());
    let o = label(dir.path(), "labels.jsonl", 4);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(server.calls(), 5);
    let recs = records(&dir.path().join("labels.jsonl"));
    assert_eq!(recs.len(), 5);
    assert!(recs.iter().all(|r| r["label"] != "failed"));
}

#[test]
fn unknown_backend_name_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), "http://127.0.0.1:1/v1");
    let o = Command::new(env!("CARGO_BIN_EXE_filterscope"))
        .args(["label", "--config", dir.path().join("config.toml").to_str().unwrap(), "--backend", "other"])
        .args(["--out", dir.path().join("x.jsonl").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
