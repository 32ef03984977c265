//! Per-topic diagnostics: agreement, lexical contrast, retrieval divergence
//! and the learnability probe.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use filterscope_core::agreement::{agreement_report, partition_quadrants, AgreementReport};
use filterscope_core::corpus::{Corpus, Document};
use filterscope_core::labeling::PairedLabelSet;
use filterscope_core::learnability::{
    build_probe_dataset, evaluate_fold, stratified_folds, CvReport, LogRegConfig, ProbeDataset,
};
use filterscope_core::lexical::{
    bh_fdr, contrastive_diff, kl_divergence, mean_vector, permutation_test, FitScope, PValueRule, PermutationConfig,
    SparseVector, VectorizerConfig, VectorizerModel,
};
use filterscope_core::retrieval::{
    centroid_query, cosine_rank, filtered_topk, overlap_report, representative_query, OverlapReport, QueryVector,
    RetrievalMethod,
};
use filterscope_core::seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CentroidSource, RunConfig};
use crate::{report, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Agree,
    Contrast,
    Retrieve,
    Probe,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Agree, Stage::Contrast, Stage::Retrieve, Stage::Probe];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Agree => "agree",
            Stage::Contrast => "contrast",
            Stage::Retrieve => "retrieve",
            Stage::Probe => "probe",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?} (expected agree, contrast, retrieve, probe)")))
    }
}

/// Parses a comma-separated stage list.
pub fn parse_stages(list: &str) -> Result<BTreeSet<Stage>> {
    let stages =
        list.split(',').filter(|s| !s.trim().is_empty()).map(Stage::from_str).collect::<Result<BTreeSet<_>>>()?;
    if stages.is_empty() {
        return Err(Error::Config("no stages selected".into()));
    }
    Ok(stages)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    /// The stage ran but the topic lacks the data it needs.
    Skipped,
}

/// Common wrapper of every stage report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub topic: String,
    pub seed: u64,
    pub stage_seed: u64,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub config: RunConfig,
    pub result: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRow {
    pub term: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub delta: f64,
    pub p: f64,
    pub p_adjusted: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlReport {
    /// D(P_a || P_b) in nats.
    pub a_to_b: f64,
    pub b_to_a: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub model_a: String,
    pub model_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub fit_scope: FitScope,
    pub vocabulary_size: usize,
    pub top_n: usize,
    pub n_permutations: usize,
    pub p_value_rule: PValueRule,
    pub alpha: f64,
    pub n_rejected: usize,
    pub kl: KlReport,
    /// Sorted by |delta| descending; positive delta means higher in B-only.
    pub terms: Vec<TermRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    #[serde(flatten)]
    pub overlap: OverlapReport,
    pub model_a: String,
    pub model_b: String,
    pub fit_scope: FitScope,
    /// Documents the query was built from.
    pub query_source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_terms: Option<Vec<String>>,
    #[serde(default)]
    pub query_terms_clamped: bool,
    pub pool_a: usize,
    pub pool_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    #[serde(flatten)]
    pub cv: CvReport,
    pub fit_scope: FitScope,
    /// Disagreement documents available before balancing.
    pub available_a: usize,
    pub available_b: usize,
    pub per_class: usize,
}

/// Reports for one topic; `None` means the stage was not selected.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicBundle {
    pub topic: String,
    pub agreement: Option<Envelope<AgreementReport>>,
    pub contrast: Option<Envelope<ContrastReport>>,
    pub retrieval: Vec<(RetrievalMethod, Envelope<RetrievalReport>)>,
    pub probe: Option<Envelope<ProbeReport>>,
}

pub struct DiagnoseInput<'a> {
    pub corpus: Option<&'a Corpus>,
    pub paired: &'a PairedLabelSet,
    pub config: &'a RunConfig,
    pub seed: u64,
    pub stages: &'a BTreeSet<Stage>,
}

/// Seed of one stage for one topic, derived from the global seed.
pub fn stage_seed(seed: u64, stage: Stage, topic: &str) -> u64 {
    seed::for_label(seed, &format!("{}/{topic}", stage.name()))
}

fn stage_error(stage: Stage, message: impl Into<String>) -> Error {
    Error::Stage { stage: stage.name(), message: message.into() }
}

/// Outcome of a stage body: a result, or a reason it could not run.
type Outcome<T> = std::result::Result<T, String>;

fn skip<T>(reason: impl fmt::Display) -> Result<Outcome<T>> {
    Ok(Err(reason.to_string()))
}

struct Ctx<'a> {
    input: &'a DiagnoseInput<'a>,
    full_model: Option<std::result::Result<VectorizerModel, String>>,
}

/// The topic's documents: every labeled document, and the two directional
/// disagreement subsets, in doc_id order.
struct TopicDocs<'a> {
    labeled: Vec<&'a Document>,
    a_only: Vec<&'a Document>,
    b_only: Vec<&'a Document>,
}

impl<'a> Ctx<'a> {
    fn vectorizer_params(&self) -> VectorizerConfig {
        self.input.config.vectorizer.params()
    }

    fn full_model(&mut self, corpus: &Corpus) -> std::result::Result<VectorizerModel, String> {
        let params = self.vectorizer_params();
        self.full_model
            .get_or_insert_with(|| {
                VectorizerModel::fit(corpus.iter().map(|d| d.abstract_text.as_str()), &params)
                    .map_err(|e| format!("vectorizer fit on the full corpus: {e}"))
            })
            .clone()
    }

    fn model_for(
        &mut self,
        scope: FitScope,
        corpus: &Corpus,
        docs: &TopicDocs<'_>,
    ) -> std::result::Result<VectorizerModel, String> {
        let params = self.vectorizer_params();
        let fit = |set: &[&Document], what: &str| {
            VectorizerModel::fit(set.iter().map(|d| d.abstract_text.as_str()), &params)
                .map_err(|e| format!("vectorizer fit on {what}: {e}"))
        };
        match scope {
            FitScope::FullCorpus => self.full_model(corpus),
            FitScope::CombinedDisagreement => {
                let pool: Vec<&Document> = docs.a_only.iter().chain(&docs.b_only).copied().collect();
                fit(&pool, "the disagreement pool")
            }
            FitScope::PerSubset => {
                let a = fit(&docs.a_only, "the A-only subset")?;
                let b = fit(&docs.b_only, "the B-only subset")?;
                VectorizerModel::merged(&[a, b]).map_err(|e| e.to_string())
            }
        }
    }
}

fn transform_all(model: &VectorizerModel, docs: &[&Document]) -> Vec<SparseVector> {
    docs.par_iter().map(|d| model.transform(&d.abstract_text)).collect()
}

/// Runs the selected stages for every topic. Topics come from the
/// configuration, or from the paired labels when the configuration lists
/// none. Results do not depend on the size of the rayon thread pool.
pub fn diagnose(input: &DiagnoseInput<'_>) -> Result<Vec<TopicBundle>> {
    input.config.validate()?;
    let first_stage = *input.stages.iter().next().ok_or_else(|| Error::Config("no stages selected".into()))?;
    let topics: Vec<String> = if input.config.topics.is_empty() {
        input.paired.topics().into_iter().collect()
    } else {
        input.config.topics.iter().map(|t| t.id.clone()).collect()
    };
    if input.paired.is_empty() {
        return Err(stage_error(first_stage, "the paired label set is empty"));
    }
    let needs_corpus = input.stages.iter().any(|s| *s != Stage::Agree);
    if needs_corpus && input.corpus.is_none() {
        let stage = *input.stages.iter().find(|s| **s != Stage::Agree).expect("checked above");
        return Err(stage_error(stage, "no corpus given (set `corpus` or pass --corpus)"));
    }

    let mut ctx = Ctx { input, full_model: None };
    topics.iter().map(|t| diagnose_topic(&mut ctx, t, first_stage)).collect()
}

fn envelope<T>(input: &DiagnoseInput<'_>, stage: Stage, topic: &str, outcome: Outcome<T>) -> Envelope<T> {
    let (status, reason, result) = match outcome {
        Ok(r) => (StageStatus::Ok, None, Some(r)),
        Err(reason) => (StageStatus::Skipped, Some(reason), None),
    };
    let mut config = input.config.clone();
    config.seed = Some(input.seed);
    Envelope {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        stage: stage.name().into(),
        topic: topic.into(),
        seed: input.seed,
        stage_seed: stage_seed(input.seed, stage, topic),
        status,
        reason,
        config,
        result,
    }
}

fn diagnose_topic(ctx: &mut Ctx<'_>, topic: &str, first_stage: Stage) -> Result<TopicBundle> {
    let input = ctx.input;
    let paired = input.paired.for_topic(topic);
    if paired.is_empty() {
        return Err(stage_error(first_stage, format!("no paired labels for topic {topic:?}")));
    }
    let mut bundle =
        TopicBundle { topic: topic.into(), agreement: None, contrast: None, retrieval: Vec::new(), probe: None };

    if input.stages.contains(&Stage::Agree) {
        let report = agreement_report(&paired)?;
        bundle.agreement = Some(envelope(input, Stage::Agree, topic, Ok(report)));
    }
    let Some(corpus) = input.corpus else {
        return Ok(bundle);
    };

    let quadrants = partition_quadrants(&paired);
    let lookup = |stage: Stage, keys: &mut dyn Iterator<Item = &str>| -> Result<Vec<&Document>> {
        keys.map(|id| {
            corpus
                .get(id)
                .ok_or_else(|| stage_error(stage, format!("document {id:?} (topic {topic:?}) is not in the corpus")))
        })
        .collect()
    };
    let needed = *input.stages.iter().find(|s| **s != Stage::Agree).unwrap_or(&Stage::Contrast);
    let docs = TopicDocs {
        labeled: lookup(needed, &mut paired.pairs().iter().map(|p| p.doc_id.as_str()))?,
        a_only: lookup(needed, &mut quadrants.a_only.iter().map(|k| k.0.as_str()))?,
        b_only: lookup(needed, &mut quadrants.b_only.iter().map(|k| k.0.as_str()))?,
    };

    if input.stages.contains(&Stage::Contrast) {
        let outcome = run_contrast(ctx, corpus, topic, &docs)?;
        bundle.contrast = Some(envelope(input, Stage::Contrast, topic, outcome));
    }
    if input.stages.contains(&Stage::Retrieve) {
        for &method in &input.config.retrieval.methods {
            let outcome = run_retrieval(ctx, corpus, &docs, method)?;
            bundle.retrieval.push((method, envelope(input, Stage::Retrieve, topic, outcome)));
        }
    }
    if input.stages.contains(&Stage::Probe) {
        let outcome = run_probe(ctx, corpus, topic, &docs)?;
        bundle.probe = Some(envelope(input, Stage::Probe, topic, outcome));
    }
    Ok(bundle)
}

fn run_contrast(
    ctx: &mut Ctx<'_>,
    corpus: &Corpus,
    topic: &str,
    docs: &TopicDocs<'_>,
) -> Result<Outcome<ContrastReport>> {
    if docs.a_only.is_empty() || docs.b_only.is_empty() {
        return skip(format!(
            "contrast needs both disagreement directions (A-only: {}, B-only: {})",
            docs.a_only.len(),
            docs.b_only.len()
        ));
    }
    let config = ctx.input.config;
    let scope = config.vectorizer.scope;
    let model = match ctx.model_for(scope, corpus, docs) {
        Ok(m) => m,
        Err(reason) => return skip(reason),
    };
    let va = transform_all(&model, &docs.a_only);
    let vb = transform_all(&model, &docs.b_only);
    let c = &config.contrast;
    let top = contrastive_diff(&va, &vb, model.vocabulary(), c.top_n)?;

    let perm = PermutationConfig {
        n_permutations: c.n_permutations,
        seed: stage_seed(ctx.input.seed, Stage::Contrast, topic),
        rule: c.p_value_rule,
    };
    let dim = model.dim();
    let p_values = top
        .par_iter()
        .map(|t| permutation_test(&va, &vb, t.term_index, dim, &perm))
        .collect::<std::result::Result<Vec<f64>, _>>()?;
    let fdr = bh_fdr(&p_values, c.alpha)?;

    let mean_a = mean_vector(&va, dim)?;
    let mean_b = mean_vector(&vb, dim)?;
    let kl = KlReport {
        a_to_b: kl_divergence(&mean_a, &mean_b, c.epsilon)?,
        b_to_a: kl_divergence(&mean_b, &mean_a, c.epsilon)?,
        epsilon: c.epsilon,
    };

    let terms = top
        .into_iter()
        .enumerate()
        .map(|(i, t)| TermRow {
            term: t.term,
            mean_a: t.mean_a,
            mean_b: t.mean_b,
            delta: t.delta,
            p: p_values[i],
            p_adjusted: fdr.adjusted[i],
            rejected: fdr.rejected[i],
        })
        .collect();
    Ok(Ok(ContrastReport {
        model_a: ctx.input.paired.model_a.clone(),
        model_b: ctx.input.paired.model_b.clone(),
        n_a: va.len(),
        n_b: vb.len(),
        fit_scope: scope,
        vocabulary_size: dim,
        top_n: c.top_n,
        n_permutations: c.n_permutations,
        p_value_rule: c.p_value_rule,
        alpha: c.alpha,
        n_rejected: fdr.n_rejected(),
        kl,
        terms,
    }))
}

struct BuiltQuery {
    query: QueryVector,
    source: &'static str,
    terms: Option<Vec<String>>,
    clamped: bool,
}

fn run_retrieval(
    ctx: &mut Ctx<'_>,
    corpus: &Corpus,
    docs: &TopicDocs<'_>,
    method: RetrievalMethod,
) -> Result<Outcome<RetrievalReport>> {
    if docs.a_only.is_empty() && docs.b_only.is_empty() {
        return skip("the disagreement pool is empty");
    }
    let config = &ctx.input.config.retrieval;
    let scope = config.scope;
    let model = match ctx.model_for(scope, corpus, docs) {
        Ok(m) => m,
        Err(reason) => return skip(reason),
    };
    let pool: Vec<&Document> = docs.a_only.iter().chain(&docs.b_only).copied().collect();
    let pool_vectors = transform_all(&model, &pool);

    let query: std::result::Result<BuiltQuery, filterscope_core::Error> = match method {
        RetrievalMethod::Centroid => {
            let (source, name) = match config.centroid_source {
                CentroidSource::TopicCorpus => (transform_all(&model, &docs.labeled), "topic_corpus"),
                CentroidSource::DisagreementPool => (pool_vectors.clone(), "disagreement_pool"),
            };
            centroid_query(&source, model.dim()).map(|q| BuiltQuery {
                query: q,
                source: name,
                terms: None,
                clamped: false,
            })
        }
        RetrievalMethod::Query => {
            let source = transform_all(&model, &docs.labeled);
            representative_query(&model, &source, config.n_terms).map(|r| BuiltQuery {
                query: r.query,
                source: "topic_corpus",
                terms: Some(r.terms),
                clamped: r.clamped,
            })
        }
    };
    let BuiltQuery { query, source: query_source, terms: query_terms, clamped } = match query {
        Ok(q) => q,
        Err(e) => return skip(format!("query construction failed: {e}")),
    };

    let ranked = cosine_rank(&query, pool.iter().zip(&pool_vectors).map(|(d, v)| (d.doc_id.as_str(), v)));
    let keys = |set: &[&Document]| -> BTreeSet<String> { set.iter().map(|d| d.doc_id.clone()).collect() };
    let top_a = filtered_topk(&ranked, &keys(&docs.a_only), config.k)?;
    let top_b = filtered_topk(&ranked, &keys(&docs.b_only), config.k)?;
    Ok(Ok(RetrievalReport {
        overlap: overlap_report(method, config.k, &top_a, &top_b),
        model_a: ctx.input.paired.model_a.clone(),
        model_b: ctx.input.paired.model_b.clone(),
        fit_scope: scope,
        query_source: query_source.to_string(),
        query_terms,
        query_terms_clamped: clamped,
        pool_a: docs.a_only.len(),
        pool_b: docs.b_only.len(),
    }))
}

fn run_probe(ctx: &mut Ctx<'_>, corpus: &Corpus, topic: &str, docs: &TopicDocs<'_>) -> Result<Outcome<ProbeReport>> {
    let config = ctx.input.config;
    let k = config.probe.k_folds;
    let per_class = docs.a_only.len().min(docs.b_only.len());
    if per_class < k {
        return skip(format!(
            "{k}-fold probe needs at least {k} documents per direction (A-only: {}, B-only: {})",
            docs.a_only.len(),
            docs.b_only.len()
        ));
    }
    let scope = config.vectorizer.scope;
    let model = match ctx.model_for(scope, corpus, docs) {
        Ok(m) => m,
        Err(reason) => return skip(reason),
    };
    let side = |set: &[&Document]| -> Vec<(String, SparseVector)> {
        set.iter().map(|d| d.doc_id.clone()).zip(transform_all(&model, set)).collect()
    };
    let seed = stage_seed(ctx.input.seed, Stage::Probe, topic);
    let dataset: ProbeDataset = build_probe_dataset(&side(&docs.a_only), &side(&docs.b_only), model.dim(), seed)?;
    let lr = LogRegConfig {
        lambda: config.probe.lambda,
        tolerance: config.probe.tolerance,
        max_iters: config.probe.max_iters,
    };
    let folds = stratified_folds(&dataset.targets, k, seed)?;
    let results = (0..k)
        .into_par_iter()
        .map(|f| evaluate_fold(&dataset, &folds, f, &lr))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Ok(ProbeReport {
        cv: CvReport::from_folds(k, seed, &dataset, &lr, &results),
        fit_scope: scope,
        available_a: docs.a_only.len(),
        available_b: docs.b_only.len(),
        per_class,
    }))
}

/// Directory name for a topic id: anything outside `[A-Za-z0-9._-]` becomes `_`.
pub fn topic_dir_name(topic: &str) -> String {
    let name: String = topic
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect();
    format!("topic_{name}")
}

pub fn retrieval_file_name(method: RetrievalMethod) -> &'static str {
    match method {
        RetrievalMethod::Centroid => "retrieval_centroid.json",
        RetrievalMethod::Query => "retrieval_query.json",
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes one directory per topic under `out_dir` and returns the files
/// written. `summary.md` is written only when every stage was selected.
pub fn write_bundle(bundles: &[TopicBundle], stages: &BTreeSet<Stage>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for bundle in bundles {
        let dir = out_dir.join(topic_dir_name(&bundle.topic));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut files: BTreeMap<String, String> = BTreeMap::new();
        if let Some(r) = &bundle.agreement {
            files.insert("agreement.json".into(), to_json(r)?);
        }
        if let Some(r) = &bundle.contrast {
            files.insert("contrast.json".into(), to_json(r)?);
        }
        for (method, r) in &bundle.retrieval {
            files.insert(retrieval_file_name(*method).into(), to_json(r)?);
        }
        if let Some(r) = &bundle.probe {
            files.insert("probe.json".into(), to_json(r)?);
        }
        if Stage::ALL.iter().all(|s| stages.contains(s)) {
            files.insert("summary.md".into(), report::topic_summary(bundle));
        }
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}
