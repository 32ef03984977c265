use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_filterscope")).args(args).output().expect("spawn filterscope")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Directory contents as relative path -> bytes.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Synthetic corpus plus paired labels, small enough for quick runs.
fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let syn = dir.join("syn");
    let o = run(&["synth", "--out", p(&syn), "--n-docs", "400", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let paired = syn.join("paired.jsonl");
    let o = run(&[
        "pair",
        "--a",
        p(&syn.join("labels_a.jsonl")),
        "--b",
        p(&syn.join("labels_b.jsonl")),
        "--out",
        p(&paired),
    ]);
    assert_eq!(code(&o), 0);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["pairs"], 400);
    assert_eq!(report["unmatched_a"], 0);
    (syn.join("corpus.jsonl"), paired)
}

fn diagnose(corpus: &Path, paired: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["diagnose", "--seed", "11", "--corpus", p(corpus), "--paired", p(paired), "--out", p(out)];
    args.extend_from_slice(&["--n-permutations", "299", "--top-n", "50"]);
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn ingest_reports_kept_and_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("docs.jsonl");
    fs::write(
        &input,
        concat!(
            "{\"doc_id\":\"a\",\"title\":\"T\",\"abstract\":\"Solar  power\\nfor clinics\",\"topics\":[\"7\"]}\n",
            "{not json\n",
            "{\"doc_id\":\"b\",\"abstract\":\"Rural energy access\"}\n",
            "{\"doc_id\":\"a\",\"abstract\":\"duplicate\"}\n",
            "{\"doc_id\":\"c\",\"abstract\":\"   \"}\n",
        ),
    )
    .unwrap();
    let out = dir.path().join("corpus.jsonl");
    let o = run(&["ingest", "--in", p(&input), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["kept"], 2);
    assert_eq!(report["malformed"][0]["line"], 2);
    assert_eq!(report["dropped"]["duplicate"], 1);
    assert_eq!(report["dropped"]["empty_abstract"], 1);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains("Solar power for clinics"));

    // Canonical output ingests to itself.
    let again = dir.path().join("again.jsonl");
    assert_eq!(code(&run(&["ingest", "--in", p(&out), "--out", p(&again)])), 0);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn ingest_missing_input_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["ingest", "--in", p(&dir.path().join("nope.jsonl")), "--out", p(&dir.path().join("c.jsonl"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn ingest_reads_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("docs.csv");
    fs::write(&input, "doc_id,title,abstract,topics,year\nx1,T,Battery storage,7;13,2021\nx2,U,Grid access,,\n")
        .unwrap();
    let out = dir.path().join("corpus.jsonl");
    let o = run(&["ingest", "--in", p(&input), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first: Value = serde_json::from_str(fs::read_to_string(&out).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["topics"], serde_json::json!(["13", "7"]));
    assert_eq!(first["year"], 2021);
}

#[test]
fn diagnose_writes_the_full_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, paired) = fixture(dir.path());
    let out = dir.path().join("out");
    let o = diagnose(&corpus, &paired, &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let topic = out.join("topic_7");
    for name in ["agreement.json", "contrast.json", "retrieval_centroid.json", "retrieval_query.json", "probe.json"] {
        let v: Value = serde_json::from_str(&fs::read_to_string(topic.join(name)).unwrap()).unwrap();
        assert_eq!(v["tool"], "filterscope");
        assert_eq!(v["topic"], "7");
        assert_eq!(v["seed"], 11);
        assert_eq!(v["status"], "ok", "{name}");
        assert_eq!(v["config"]["seed"], 11);
        assert_eq!(v["config"]["contrast"]["n_permutations"], 299);
        assert!(v["result"].is_object(), "{name}");
    }
    let contrast: Value = serde_json::from_str(&fs::read_to_string(topic.join("contrast.json")).unwrap()).unwrap();
    assert_eq!(contrast["result"]["terms"].as_array().unwrap().len(), 50);
    let agreement: Value = serde_json::from_str(&fs::read_to_string(topic.join("agreement.json")).unwrap()).unwrap();
    assert_eq!(agreement["result"]["n_pairs"], 400);
    assert!((agreement["result"]["raw_agreement"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    let summary = fs::read_to_string(topic.join("summary.md")).unwrap();
    assert!(summary.starts_with("# Topic 7"));

    let rendered = run(&["report", "--in", p(&out)]);
    assert_eq!(code(&rendered), 0);
    let md = String::from_utf8(rendered.stdout).unwrap();
    assert_eq!(md, summary);
    assert!(md.contains("| Term |") && md.contains("Mean ROC-AUC"));
}

#[test]
fn stage_flag_limits_output() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, paired) = fixture(dir.path());
    let out = dir.path().join("out");
    assert_eq!(code(&diagnose(&corpus, &paired, &out, &["--stages", "contrast"])), 0);
    let files: Vec<_> = snapshot(&out).into_keys().collect();
    assert_eq!(files, [PathBuf::from("topic_7/contrast.json")]);

    let out = dir.path().join("out2");
    assert_eq!(code(&diagnose(&corpus, &paired, &out, &["--stages", "agree,retrieve"])), 0);
    let files: Vec<_> = snapshot(&out).into_keys().collect();
    assert_eq!(
        files,
        ["topic_7/agreement.json", "topic_7/retrieval_centroid.json", "topic_7/retrieval_query.json"]
            .map(PathBuf::from)
    );

    let o = diagnose(&corpus, &paired, &dir.path().join("out3"), &["--stages", "bogus"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_stage_input_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = fixture(dir.path());
    let o = diagnose(&corpus, &dir.path().join("missing.jsonl"), &dir.path().join("out"), &["--stages", "probe"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("probe"));

    let (_, paired) = fixture(&dir.path().join("second"));
    let o = diagnose(&dir.path().join("no_corpus.jsonl"), &paired, &dir.path().join("out"), &["--stages", "contrast"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("contrast"));

    // Agreement alone needs no corpus.
    let o = diagnose(&dir.path().join("no_corpus.jsonl"), &paired, &dir.path().join("out"), &["--stages", "agree"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn diagnose_requires_a_seed() {
    let o = run(&["diagnose", "--out", "/tmp/unused"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn same_seed_same_bytes_and_embedded_config_replays() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, paired) = fixture(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&diagnose(&corpus, &paired, &a, &["--threads", "1"])), 0);
    assert_eq!(code(&diagnose(&corpus, &paired, &b, &["--threads", "3"])), 0);
    let first = snapshot(&a);
    assert_eq!(first, snapshot(&b));

    let other = dir.path().join("other_seed");
    let mut args = vec!["diagnose", "--seed", "12", "--corpus", p(&corpus), "--paired", p(&paired), "--out", p(&other)];
    args.extend_from_slice(&["--n-permutations", "299", "--top-n", "50"]);
    assert_eq!(code(&run(&args)), 0);
    assert_ne!(first, snapshot(&other));

    // The config embedded in any report, fed back in, reproduces the bundle.
    let envelope: Value = serde_json::from_slice(&first[Path::new("topic_7/probe.json")]).unwrap();
    let cfg = dir.path().join("replay.json");
    fs::write(&cfg, serde_json::to_string(&envelope["config"]).unwrap()).unwrap();
    let replay = dir.path().join("replay");
    let o = run(&["diagnose", "--config", p(&cfg), "--seed", "11", "--out", p(&replay)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(first, snapshot(&replay));
}

#[test]
fn split_keeps_class_proportions() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = fixture(dir.path());
    let labels = dir.path().join("syn/labels_a.jsonl");
    let (train, test) = (dir.path().join("train.jsonl"), dir.path().join("test.jsonl"));
    let o = run(&[
        "split",
        "--corpus",
        p(&corpus),
        "--labels",
        p(&labels),
        "--topic",
        "7",
        "--seed",
        "5",
        "--train-out",
        p(&train),
        "--test-out",
        p(&test),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["train"].as_u64().unwrap() + r["test"].as_u64().unwrap(), 400);
    let relevant = r["train_relevant"].as_u64().unwrap() + r["test_relevant"].as_u64().unwrap();
    let expected_train = (relevant as f64 * 0.8).round() as u64;
    assert_eq!(r["train_relevant"].as_u64().unwrap(), expected_train);
    assert_eq!(fs::read_to_string(&train).unwrap().lines().count() as u64, r["train"].as_u64().unwrap());
}

#[test]
fn bad_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, paired) = fixture(dir.path());
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[contrast]\nalhpa = 0.1\n").unwrap();
    let o = run(&[
        "diagnose",
        "--config",
        p(&cfg),
        "--seed",
        "1",
        "--corpus",
        p(&corpus),
        "--paired",
        p(&paired),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 2);
    let o = diagnose(&corpus, &paired, &dir.path().join("o"), &["--alpha", "2"]);
    assert_eq!(code(&o), 2);
}
