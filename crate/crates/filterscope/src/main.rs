use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use filterscope::backend::{BackendDescriptor, HttpBackend};
use filterscope::config::{CentroidSource, RunConfig};
use filterscope::core::corpus::{stratified_split, SplitSpec};
use filterscope::core::labeling::{pair_labels, PromptTemplate};
use filterscope::core::lexical::{FitScope, PValueRule};
use filterscope::corpus_io::{ingest_corpus, read_corpus, write_corpus, CorpusFormat};
use filterscope::diagnose::{diagnose, parse_stages, write_bundle, DiagnoseInput};
use filterscope::labeling::{label_corpus, load_label_set, LabelJob, ResumeStore};
use filterscope::labels_io::{read_paired, write_labels, write_paired};
use filterscope::{report, synthetic, Error, Result, EXIT_BACKEND};
use serde::Serialize;

/// Label a corpus with LLM relevance filters and diagnose where they disagree.
#[derive(Parser)]
#[command(name = "filterscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean and deduplicate a JSONL or CSV corpus into canonical JSONL.
    Ingest(IngestArgs),
    /// Label every (document, topic) pair with one backend, resumably.
    Label(LabelArgs),
    /// Join two label files on (doc_id, topic).
    Pair(PairArgs),
    /// Run agreement, contrast, retrieval and probe stages per topic.
    Diagnose(DiagnoseArgs),
    /// Render a report bundle as Markdown.
    Report(ReportArgs),
    /// Stratified train/test split of a corpus by one model's labels.
    Split(SplitArgs),
    /// Write a synthetic corpus with planted disagreement vocabularies.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to the input file extension.
    #[arg(long, value_enum)]
    format: Option<CorpusFormat>,
    /// Also write the ingestion report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `corpus` in the configuration.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Backend name from the configuration.
    #[arg(long)]
    backend: String,
    /// Label file, also used as the resume store.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    paired: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "agree,contrast,retrieve,probe")]
    stages: String,
    /// Worker threads for per-term tests and folds; output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    min_df: Option<u64>,
    #[arg(long)]
    max_df: Option<f64>,
    #[arg(long, value_parser = parse_scope)]
    scope: Option<FitScope>,
    #[arg(long)]
    n_permutations: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_parser = parse_rule)]
    p_value_rule: Option<PValueRule>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_terms: Option<usize>,
    #[arg(long, value_parser = parse_scope)]
    retrieval_scope: Option<FitScope>,
    #[arg(long, value_parser = parse_centroid_source)]
    centroid_source: Option<CentroidSource>,
    #[arg(long)]
    k_folds: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

fn parse_scope(s: &str) -> std::result::Result<FitScope, String> {
    parse_enum(s)
}

fn parse_rule(s: &str) -> std::result::Result<PValueRule, String> {
    parse_enum(s)
}

fn parse_centroid_source(s: &str) -> std::result::Result<CentroidSource, String> {
    parse_enum(s)
}

impl Overrides {
    fn apply(&self, c: &mut RunConfig) {
        fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *slot = v.clone();
            }
        }
        set(&mut c.vectorizer.min_df, &self.min_df);
        set(&mut c.vectorizer.max_df, &self.max_df);
        set(&mut c.vectorizer.scope, &self.scope);
        set(&mut c.contrast.n_permutations, &self.n_permutations);
        set(&mut c.contrast.alpha, &self.alpha);
        set(&mut c.contrast.top_n, &self.top_n);
        set(&mut c.contrast.epsilon, &self.epsilon);
        set(&mut c.contrast.p_value_rule, &self.p_value_rule);
        set(&mut c.retrieval.k, &self.k);
        set(&mut c.retrieval.n_terms, &self.n_terms);
        set(&mut c.retrieval.scope, &self.retrieval_scope);
        set(&mut c.retrieval.centroid_source, &self.centroid_source);
        set(&mut c.probe.k_folds, &self.k_folds);
        set(&mut c.probe.lambda, &self.lambda);
    }
}

#[derive(Args)]
struct ReportArgs {
    /// Directory written by `diagnose`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Write Markdown here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Label file whose Relevant/Non-Relevant decisions stratify the split.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    topic: String,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    n_docs: usize,
    #[arg(long)]
    seed: Option<u64>,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

fn cmd_ingest(args: IngestArgs) -> Result<ExitCode> {
    let format = args.format.unwrap_or_else(|| CorpusFormat::from_path(&args.input));
    let (corpus, report) = ingest_corpus(&args.input, format)?;
    ensure_parent(&args.out)?;
    write_corpus(&corpus, &args.out)?;
    if let Some(path) = &args.report {
        write_json(&report, path)?;
    }
    print_json(&report)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_label(args: LabelArgs) -> Result<ExitCode> {
    let config = RunConfig::load(&args.config)?;
    config.validate()?;
    if config.topics.is_empty() {
        return Err(Error::Config("the configuration lists no topics".into()));
    }
    let corpus_path = args
        .corpus
        .or_else(|| config.corpus.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::Config("no corpus given (set `corpus` or pass --corpus)".into()))?;
    let corpus = read_corpus(&corpus_path)?;
    let descriptor: BackendDescriptor = config.backend(&args.backend)?.clone();
    let backend = HttpBackend::new(descriptor);
    ensure_parent(&args.out)?;
    let store = ResumeStore::open(&args.out, &args.backend)?;
    let template = PromptTemplate::relevance_v1();
    let job = LabelJob {
        corpus: &corpus,
        topics: &config.topics,
        template: &template,
        generation: config.generation,
        concurrency: args.concurrency,
        retry: config.retry.policy(),
    };
    let name = args.backend.clone();
    let progress = move |done: usize, total: usize| {
        let step = (total / 20).max(1);
        if done.is_multiple_of(step) || done == total {
            eprintln!("[{name}] {done}/{total}");
        }
    };
    let (_, summary) = label_corpus(&job, &backend, &store, Some(&progress))?;
    print_json(&summary)?;
    if summary.failed > 0 {
        eprintln!("error: {} request(s) failed after retries; rerun to retry them", summary.failed);
        return Ok(ExitCode::from(EXIT_BACKEND as u8));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct PairReport {
    model_a: String,
    model_b: String,
    pairs: usize,
    unmatched_a: usize,
    unmatched_b: usize,
    excluded_a: usize,
    excluded_b: usize,
}

fn cmd_pair(args: PairArgs) -> Result<ExitCode> {
    for p in [&args.a, &args.b] {
        if !p.exists() {
            return Err(Error::Validation(format!("{}: label file not found", p.display())));
        }
    }
    let a = load_label_set(&args.a)?;
    let b = load_label_set(&args.b)?;
    let pairing = pair_labels(&a, &b)?;
    ensure_parent(&args.out)?;
    write_paired(&pairing.paired, &args.out)?;
    print_json(&PairReport {
        model_a: pairing.paired.model_a.clone(),
        model_b: pairing.paired.model_b.clone(),
        pairs: pairing.paired.len(),
        unmatched_a: pairing.unmatched_a,
        unmatched_b: pairing.unmatched_b,
        excluded_a: pairing.excluded_a,
        excluded_b: pairing.excluded_b,
    })?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<ExitCode> {
    let mut config = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &args.corpus {
        config.corpus = Some(p.display().to_string());
    }
    if let Some(p) = &args.paired {
        config.paired = Some(p.display().to_string());
    }
    args.overrides.apply(&mut config);
    config.seed = Some(args.seed);
    config.validate()?;
    let stages = parse_stages(&args.stages)?;
    let first = stages.iter().next().copied().expect("parse_stages rejects empty lists");

    let paired_path = config
        .paired
        .clone()
        .ok_or_else(|| Error::Stage { stage: first.name(), message: "no paired label file given".into() })?;
    if !Path::new(&paired_path).exists() {
        return Err(Error::Stage {
            stage: first.name(),
            message: format!("paired label file {paired_path} not found"),
        });
    }
    let paired = read_paired(Path::new(&paired_path))?;
    let corpus = match &config.corpus {
        Some(p) if Path::new(p).exists() => Some(read_corpus(Path::new(p))?),
        Some(p) => {
            if let Some(stage) = stages.iter().find(|s| s.name() != "agree") {
                return Err(Error::Stage { stage: stage.name(), message: format!("corpus file {p} not found") });
            }
            None
        }
        None => None,
    };

    let input =
        DiagnoseInput { corpus: corpus.as_ref(), paired: &paired, config: &config, seed: args.seed, stages: &stages };
    let threads = args.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let bundles = pool.install(|| diagnose(&input))?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let written = write_bundle(&bundles, &stages, &args.out)?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode> {
    let markdown = report::render_bundle(&args.input)?;
    match &args.out {
        Some(path) => fs::write(path, markdown).map_err(|e| Error::io(path, e))?,
        None => print!("{markdown}"),
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SplitReport {
    train: usize,
    test: usize,
    train_relevant: usize,
    test_relevant: usize,
}

fn cmd_split(args: SplitArgs) -> Result<ExitCode> {
    let corpus = read_corpus(&args.corpus)?;
    let labels: BTreeMap<String, bool> = load_label_set(&args.labels)?
        .into_iter()
        .filter(|r| r.topic == args.topic)
        .filter_map(|r| r.label.label().map(|l| (r.doc_id, l.is_relevant())))
        .collect();
    let spec = SplitSpec::new(args.train_fraction, "relevant", args.seed)?;
    let (train, test) = stratified_split(&corpus, &labels, &spec)?;
    ensure_parent(&args.train_out)?;
    ensure_parent(&args.test_out)?;
    write_corpus(&train, &args.train_out)?;
    write_corpus(&test, &args.test_out)?;
    let relevant = |c: &filterscope::core::corpus::Corpus| c.iter().filter(|d| labels[&d.doc_id]).count();
    print_json(&SplitReport {
        train: train.len(),
        test: test.len(),
        train_relevant: relevant(&train),
        test_relevant: relevant(&test),
    })?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    let mut spec = synthetic::SyntheticSpec { n_docs: args.n_docs, ..Default::default() };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let data = synthetic::generate(&spec)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_corpus(&data.corpus, &args.out.join("corpus.jsonl"))?;
    write_labels(&data.labels_a, &args.out.join("labels_a.jsonl"))?;
    write_labels(&data.labels_b, &args.out.join("labels_b.jsonl"))?;
    let planted: BTreeMap<&str, &Vec<String>> =
        [(spec.model_a.as_str(), &data.planted_a), (spec.model_b.as_str(), &data.planted_b)].into();
    write_json(&planted, &args.out.join("planted.json"))?;
    let config = RunConfig { topics: vec![data.topic.clone()], ..Default::default() };
    let toml = toml::to_string(&config).map_err(|e| Error::Config(e.to_string()))?;
    let path = args.out.join("config.toml");
    fs::write(&path, toml).map_err(|e| Error::io(&path, e))?;
    eprintln!("wrote {} documents to {}", data.corpus.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Label(a) => cmd_label(a),
        Command::Pair(a) => cmd_pair(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Report(a) => cmd_report(a),
        Command::Split(a) => cmd_split(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
