//! Run configuration shared by every subcommand and embedded in reports.

use std::path::Path;
use std::time::Duration;

use filterscope_core::labeling::{GenerationConfig, TopicSpec};
use filterscope_core::lexical::{FitScope, PValueRule, StopwordSet, TokenPattern, VectorizerConfig};
use filterscope_core::retrieval::RetrievalMethod;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendDescriptor, RetryPolicy};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<String>,
    pub paired: Option<String>,
    pub topics: Vec<TopicSpec>,
    pub backends: Vec<BackendDescriptor>,
    pub generation: GenerationConfig,
    pub retry: RetryConfig,
    pub vectorizer: VectorizerSection,
    pub contrast: ContrastConfig,
    pub retrieval: RetrievalConfig,
    pub probe: ProbeConfig,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryConfig {
    pub base_ms: u64,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetryConfig {
    fn default() -> Self {
        Self { base_ms: 1000, factor: 2.0, max_attempts: 5 }
    }
}

impl RetryConfig {
    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy { base: Duration::from_millis(self.base_ms), factor: self.factor, max_attempts: self.max_attempts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VectorizerSection {
    pub min_df: u64,
    pub max_df: f64,
    pub stopwords: StopwordSet,
    pub token_pattern: TokenPattern,
    /// Fitting scope for the contrast and probe stages.
    pub scope: FitScope,
}

impl Default for VectorizerSection {
    fn default() -> Self {
        let v = VectorizerConfig::default();
        Self {
            min_df: v.min_df,
            max_df: v.max_df,
            stopwords: v.stopwords,
            token_pattern: v.token_pattern,
            scope: FitScope::default(),
        }
    }
}

impl VectorizerSection {
    pub fn params(&self) -> VectorizerConfig {
        VectorizerConfig {
            min_df: self.min_df,
            max_df: self.max_df,
            stopwords: self.stopwords,
            token_pattern: self.token_pattern,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastConfig {
    pub n_permutations: usize,
    pub alpha: f64,
    pub top_n: usize,
    /// Smoothing added to every mean weight before KL divergence.
    pub epsilon: f64,
    pub p_value_rule: PValueRule,
}

impl Default for ContrastConfig {
    fn default() -> Self {
        Self { n_permutations: 9999, alpha: 0.05, top_n: 200, epsilon: 1e-9, p_value_rule: PValueRule::AddOne }
    }
}

/// Which documents the centroid query averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidSource {
    /// Every labeled document of the topic.
    #[default]
    TopicCorpus,
    /// Only the disagreement pool being ranked.
    DisagreementPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub k: usize,
    pub n_terms: usize,
    pub methods: Vec<RetrievalMethod>,
    pub scope: FitScope,
    pub centroid_source: CentroidSource,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: 20,
            n_terms: 8,
            methods: vec![RetrievalMethod::Centroid, RetrievalMethod::Query],
            scope: FitScope::FullCorpus,
            centroid_source: CentroidSource::TopicCorpus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub k_folds: usize,
    pub lambda: f64,
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { k_folds: 5, lambda: 1.0, tolerance: 1e-6, max_iters: 1000 }
    }
}

impl RunConfig {
    /// Reads TOML or JSON, chosen by extension (anything but `.json` is TOML).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let config: Self = if is_json {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.generation.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.vectorizer.params().validate().map_err(|e| Error::Config(e.to_string()))?;
        let c = &self.contrast;
        if c.n_permutations < 1 {
            return bad("contrast.n_permutations must be at least 1".into());
        }
        if !(c.alpha > 0.0 && c.alpha < 1.0) {
            return bad(format!("contrast.alpha must lie in (0, 1), got {}", c.alpha));
        }
        if c.top_n < 1 {
            return bad("contrast.top_n must be at least 1".into());
        }
        if !(c.epsilon > 0.0 && c.epsilon.is_finite()) {
            return bad(format!("contrast.epsilon must be positive, got {}", c.epsilon));
        }
        let r = &self.retrieval;
        if r.k < 1 || r.n_terms < 1 {
            return bad("retrieval.k and retrieval.n_terms must be at least 1".into());
        }
        let p = &self.probe;
        if p.k_folds < 2 {
            return bad("probe.k_folds must be at least 2".into());
        }
        let bad_tolerance = p.tolerance.is_nan() || p.tolerance <= 0.0;
        if !(p.lambda >= 0.0 && p.lambda.is_finite()) || bad_tolerance || p.max_iters < 1 {
            return bad("probe.lambda must be >= 0, tolerance > 0 and max_iters >= 1".into());
        }
        if self.retry.max_attempts < 1 || self.retry.factor.is_nan() || self.retry.factor < 1.0 {
            return bad("retry.max_attempts must be >= 1 and retry.factor >= 1".into());
        }
        let mut names: Vec<&str> = self.backends.iter().map(|b| b.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("backend name {:?} is used twice", w[0]));
        }
        let mut ids: Vec<&str> = self.topics.iter().map(|t| t.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("topic {:?} is listed twice", w[0]));
        }
        Ok(())
    }

    pub fn backend(&self, name: &str) -> Result<&BackendDescriptor> {
        self.backends
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Config(format!("no backend named {name:?} in the configuration")))
    }
}
