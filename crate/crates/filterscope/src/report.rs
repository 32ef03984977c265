//! Markdown renderings of stage reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use filterscope_core::agreement::{AgreementReport, Kappa};
use filterscope_core::retrieval::RetrievalMethod;
use serde::de::DeserializeOwned;

use crate::diagnose::{
    retrieval_file_name, ContrastReport, Envelope, ProbeReport, RetrievalReport, StageStatus, TopicBundle,
};
use crate::{Error, Result};

/// Term rows shown in Markdown; the JSON report keeps all of them.
pub const CONTRAST_ROWS: usize = 20;

fn kappa_text(k: Kappa) -> String {
    match k {
        Kappa::Defined(v) => format!("{v:.3}"),
        Kappa::Undefined => "undefined".into(),
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

pub fn agreement_table(r: &AgreementReport) -> String {
    let f = &r.quadrant_fractions;
    let c = &r.counts;
    let mut s = String::new();
    s.push_str("| Models | Pairs | Raw agreement | Cohen's kappa |\n|---|---:|---:|---:|\n");
    let _ = writeln!(
        s,
        "| {} vs {} | {} | {:.3} | {} |",
        r.model_a,
        r.model_b,
        r.n_pairs,
        r.raw_agreement,
        kappa_text(r.kappa)
    );
    s.push('\n');
    s.push_str("| Quadrant | Count | Share |\n|---|---:|---:|\n");
    let _ = writeln!(s, "| Both relevant | {} | {} |", c.both_relevant, pct(f.both_relevant));
    let _ = writeln!(s, "| {} only relevant | {} | {} |", r.model_a, c.a_only_relevant, pct(f.a_only_relevant));
    let _ = writeln!(s, "| {} only relevant | {} | {} |", r.model_b, c.b_only_relevant, pct(f.b_only_relevant));
    let _ = writeln!(s, "| Both non-relevant | {} | {} |", c.both_nonrelevant, pct(f.both_nonrelevant));
    s
}

fn sci(p: f64) -> String {
    if p < 1e-3 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

pub fn contrast_table(r: &ContrastReport, rows: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} only: {} documents, {} only: {} documents. {} of the top {} terms are significant at FDR {}. \
         KL divergence {} to {}: {:.4} nats ({:.4} reversed).\n",
        r.model_a,
        r.n_a,
        r.model_b,
        r.n_b,
        r.n_rejected,
        r.terms.len(),
        r.alpha,
        r.model_a,
        r.model_b,
        r.kl.a_to_b,
        r.kl.b_to_a
    );
    let _ = writeln!(
        s,
        "| Term | Mean TF-IDF ({} only) | Mean TF-IDF ({} only) | Difference | p | Adjusted p | Significant |",
        r.model_a, r.model_b
    );
    s.push_str("|---|---:|---:|---:|---:|---:|:---:|\n");
    for t in r.terms.iter().take(rows) {
        let _ = writeln!(
            s,
            "| {} | {:.4} | {:.4} | {:+.4} | {} | {} | {} |",
            t.term,
            t.mean_a,
            t.mean_b,
            t.delta,
            sci(t.p),
            sci(t.p_adjusted),
            if t.rejected { "yes" } else { "no" }
        );
    }
    s
}

fn method_name(m: RetrievalMethod) -> &'static str {
    match m {
        RetrievalMethod::Centroid => "Centroid",
        RetrievalMethod::Query => "Query",
    }
}

pub fn overlap_table(reports: &[&RetrievalReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let mut s = String::new();
    let _ = writeln!(s, "| Method | k | {} only | {} only | Both | Query terms |", first.model_a, first.model_b);
    s.push_str("|---|---:|---:|---:|---:|---|\n");
    for r in reports {
        let o = &r.overlap;
        let terms = r.query_terms.as_ref().map(|t| t.join(" ")).unwrap_or_default();
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            method_name(o.method),
            o.k,
            o.a_only,
            o.b_only,
            o.both,
            terms
        );
    }
    s
}

pub fn probe_line(r: &ProbeReport) -> String {
    format!(
        "Mean ROC-AUC {:.3} ± {:.3} over {} stratified folds ({} documents per direction, {} features, lambda {}, {} of {} folds converged).\n",
        r.cv.mean, r.cv.std, r.cv.k, r.per_class, r.cv.n_features, r.cv.lambda, r.cv.converged_folds, r.cv.k
    )
}

fn section<T>(s: &mut String, title: &str, env: Option<&Envelope<T>>, body: impl FnOnce(&T) -> String) {
    let Some(env) = env else {
        return;
    };
    let _ = writeln!(s, "## {title}\n");
    match (&env.status, &env.result) {
        (StageStatus::Ok, Some(r)) => s.push_str(&body(r)),
        _ => {
            let _ = writeln!(s, "Skipped: {}", env.reason.as_deref().unwrap_or("no result"));
        }
    }
    s.push('\n');
}

fn render(
    topic: &str,
    seed: Option<u64>,
    agreement: Option<&Envelope<AgreementReport>>,
    contrast: Option<&Envelope<ContrastReport>>,
    retrieval: &[&Envelope<RetrievalReport>],
    probe: Option<&Envelope<ProbeReport>>,
) -> String {
    let mut s = format!("# Topic {topic}\n\n");
    if let Some(seed) = seed {
        let _ = writeln!(s, "Seed: {seed}\n");
    }
    section(&mut s, "Agreement", agreement, agreement_table);
    section(&mut s, "Lexical contrast", contrast, |r| contrast_table(r, CONTRAST_ROWS));
    if !retrieval.is_empty() {
        s.push_str("## Retrieval divergence\n\n");
        let ok: Vec<&RetrievalReport> = retrieval.iter().filter_map(|e| e.result.as_ref()).collect();
        s.push_str(&overlap_table(&ok));
        for e in retrieval.iter().filter(|e| e.result.is_none()) {
            let _ = writeln!(s, "\nSkipped: {}", e.reason.as_deref().unwrap_or("no result"));
        }
        s.push('\n');
    }
    section(&mut s, "Learnability probe", probe, probe_line);
    s
}

pub fn topic_summary(bundle: &TopicBundle) -> String {
    let seed = bundle
        .agreement
        .as_ref()
        .map(|e| e.seed)
        .or(bundle.contrast.as_ref().map(|e| e.seed))
        .or(bundle.probe.as_ref().map(|e| e.seed));
    let retrieval: Vec<_> = bundle.retrieval.iter().map(|(_, e)| e).collect();
    render(&bundle.topic, seed, bundle.agreement.as_ref(), bundle.contrast.as_ref(), &retrieval, bundle.probe.as_ref())
}

fn read_optional<T: DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map(Some).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// Renders every topic directory under `bundle_dir` from its JSON reports.
pub fn render_bundle(bundle_dir: &Path) -> Result<String> {
    let mut dirs: Vec<_> = fs::read_dir(bundle_dir)
        .map_err(|e| Error::io(bundle_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut out = String::new();
    for dir in dirs {
        let agreement: Option<Envelope<AgreementReport>> = read_optional(&dir.join("agreement.json"))?;
        let contrast: Option<Envelope<ContrastReport>> = read_optional(&dir.join("contrast.json"))?;
        let mut retrieval = Vec::new();
        for m in [RetrievalMethod::Centroid, RetrievalMethod::Query] {
            if let Some(e) = read_optional::<Envelope<RetrievalReport>>(&dir.join(retrieval_file_name(m)))? {
                retrieval.push(e);
            }
        }
        let probe: Option<Envelope<ProbeReport>> = read_optional(&dir.join("probe.json"))?;
        let topic = agreement
            .as_ref()
            .map(|e| e.topic.clone())
            .or(contrast.as_ref().map(|e| e.topic.clone()))
            .or(retrieval.first().map(|e| e.topic.clone()))
            .or(probe.as_ref().map(|e| e.topic.clone()));
        let Some(topic) = topic else {
            continue;
        };
        let seed = agreement.as_ref().map(|e| e.seed).or(contrast.as_ref().map(|e| e.seed));
        let refs: Vec<_> = retrieval.iter().collect();
        out.push_str(&render(&topic, seed, agreement.as_ref(), contrast.as_ref(), &refs, probe.as_ref()));
    }
    if out.is_empty() {
        return Err(Error::Validation(format!("{}: no topic reports found", bundle_dir.display())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use filterscope_core::agreement::{ConfusionCounts, QuadrantFractions};

    #[test]
    fn agreement_table_shape() {
        let r = AgreementReport {
            model_a: "llama".into(),
            model_b: "qwen".into(),
            n_pairs: 100,
            counts: ConfusionCounts::new(40, 10, 10, 40),
            raw_agreement: 0.8,
            kappa: Kappa::Defined(0.6),
            quadrant_fractions: QuadrantFractions {
                both_relevant: 0.4,
                a_only_relevant: 0.1,
                b_only_relevant: 0.1,
                both_nonrelevant: 0.4,
            },
        };
        let t = agreement_table(&r);
        assert!(t.contains("| llama vs qwen | 100 | 0.800 | 0.600 |"));
        assert!(t.contains("| llama only relevant | 10 | 10.0% |"));
    }
}
