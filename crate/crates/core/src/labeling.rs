//! Prompt rendering, response parsing, and pairing of label sets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, TopicId};
use crate::{Error, Result};

/// A topic as presented to the labeling model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSpec {
    pub id: TopicId,
    pub name: String,
    /// Target descriptions, one per line when rendered.
    #[serde(default)]
    pub targets: Vec<String>,
}

/// Version tag of [`PromptTemplate::relevance_v1`].
pub const TEMPLATE_V1: &str = "relevance-v1";

/// System and user message templates with `{name}` placeholders.
///
/// Literal braces are written `{{` and `}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub version: String,
    pub system_text: String,
    pub user_text: String,
}

impl PromptTemplate {
    /// The shipped relevance-assessment template.
    pub fn relevance_v1() -> Self {
        Self {
            version: TEMPLATE_V1.into(),
            system_text: include_str!("../assets/prompt_relevance_v1_system.txt").into(),
            user_text: include_str!("../assets/prompt_relevance_v1_user.txt").into(),
        }
    }

    pub fn render(&self, bindings: &BTreeMap<&str, &str>) -> Result<PromptMessages> {
        let system = render(&self.system_text, bindings)?;
        let user = render(&self.user_text, bindings)?;
        if system.trim().is_empty() || user.trim().is_empty() {
            return Err(Error::Domain("rendered prompt has an empty message".into()));
        }
        Ok(PromptMessages { system, user })
    }
}

/// A rendered system/user message pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptMessages {
    pub system: String,
    pub user: String,
}

fn render(template: &str, bindings: &BTreeMap<&str, &str>) -> Result<String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{{") {
            out.push('{');
            rest = after;
        } else if let Some(after) = tail.strip_prefix("}}") {
            out.push('}');
            rest = after;
        } else if tail.starts_with('}') {
            return Err(Error::Domain("unmatched `}` in template".into()));
        } else {
            let end = tail.find('}').ok_or_else(|| Error::Domain("unterminated placeholder in template".into()))?;
            let name = &tail[1..end];
            let value = bindings.get(name).ok_or_else(|| Error::UnboundPlaceholder(name.to_string()))?;
            out.push_str(value);
            rest = &tail[end + 1..];
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Renders the messages for one (document, topic) pair.
///
/// Bound placeholders: `doc_id`, `title`, `abstract`, `topic_id`,
/// `topic_name`, and `topic_targets` (only when the topic lists targets).
pub fn build_prompt(doc: &Document, topic: &TopicSpec, template: &PromptTemplate) -> Result<PromptMessages> {
    let targets = topic.targets.join("\n");
    let mut bindings = BTreeMap::new();
    bindings.insert("doc_id", doc.doc_id.as_str());
    bindings.insert("title", doc.title.as_str());
    bindings.insert("abstract", doc.abstract_text.as_str());
    bindings.insert("topic_id", topic.id.as_str());
    bindings.insert("topic_name", topic.name.as_str());
    if !topic.targets.is_empty() {
        bindings.insert("topic_targets", targets.as_str());
    }
    template.render(&bindings)
}

/// Decoding parameters sent to every backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub sampling_enabled: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { max_new_tokens: 500, temperature: 0.0, sampling_enabled: false }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_new_tokens == 0 {
            return Err(Error::Domain("max_new_tokens must be positive".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Domain(format!("invalid temperature {}", self.temperature)));
        }
        if !self.sampling_enabled && self.temperature != 0.0 {
            return Err(Error::Domain("temperature must be 0.0 when sampling is disabled".into()));
        }
        Ok(())
    }
}

/// Binary relevance decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Relevant,
    NonRelevant,
}

impl Label {
    pub fn is_relevant(self) -> bool {
        self == Label::Relevant
    }
}

/// Outcome stored for one labeling request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelOutcome {
    Relevant,
    NonRelevant,
    /// The response carried no recognizable label token.
    Unparseable,
    /// The backend never produced a response.
    Failed,
}

impl LabelOutcome {
    pub fn label(self) -> Option<Label> {
        match self {
            LabelOutcome::Relevant => Some(Label::Relevant),
            LabelOutcome::NonRelevant => Some(Label::NonRelevant),
            LabelOutcome::Unparseable | LabelOutcome::Failed => None,
        }
    }
}

impl From<Label> for LabelOutcome {
    fn from(label: Label) -> Self {
        match label {
            Label::Relevant => LabelOutcome::Relevant,
            Label::NonRelevant => LabelOutcome::NonRelevant,
        }
    }
}

/// A successfully parsed response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub label: Label,
    pub justification: String,
    pub contribution_type: Option<String>,
}

/// Result of [`parse_response`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseOutcome {
    Parsed(ParsedResponse),
    Unparseable(String),
}

// Spellings that negate the label. All contain "relevant", so they are
// searched before the bare token.
const NEGATIVE_TOKENS: [&str; 6] =
    ["non-relevant", "non relevant", "non_relevant", "nonrelevant", "not relevant", "irrelevant"];
const POSITIVE_TOKEN: &str = "relevant";
const CONTRIBUTION_MARKER: &str = "contribution type";

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Finds `needle` in `hay` as a whole word; returns the byte range.
fn find_word(hay: &str, needle: &str) -> Option<(usize, usize)> {
    let bytes = hay.as_bytes();
    let mut from = 0;
    while let Some(rel) = hay[from..].find(needle) {
        let start = from + rel;
        let end = start + needle.len();
        let left_ok = start == 0 || !is_word_byte(bytes[start - 1]);
        let right_ok = end == bytes.len() || !is_word_byte(bytes[end]);
        if left_ok && right_ok {
            return Some((start, end));
        }
        from = start + 1;
    }
    None
}

fn find_label(lower_line: &str) -> Option<(Label, usize, usize)> {
    let negative = NEGATIVE_TOKENS.iter().filter_map(|tok| find_word(lower_line, tok)).min_by_key(|&(start, _)| start);
    if let Some((s, e)) = negative {
        return Some((Label::NonRelevant, s, e));
    }
    find_word(lower_line, POSITIVE_TOKEN).map(|(s, e)| (Label::Relevant, s, e))
}

fn trim_separators(s: &str) -> &str {
    s.trim_matches(|c: char| {
        c.is_whitespace() || matches!(c, '.' | ':' | '-' | '\u{2014}' | '\u{2013}' | ',' | ';' | '*' | '#' | '"' | '`')
    })
}

/// Splits a `Contribution type: ...` field off a line. Returns the line with
/// the field removed and the field value.
fn split_contribution(line: &str) -> (String, Option<String>) {
    let lower = line.to_ascii_lowercase();
    let Some(pos) = lower.find(CONTRIBUTION_MARKER) else {
        return (line.to_string(), None);
    };
    let after = &line[pos + CONTRIBUTION_MARKER.len()..];
    let after = after.trim_start_matches(|c: char| c == '*' || c.is_whitespace());
    let Some(value) = after.strip_prefix(':') else {
        return (line.to_string(), None);
    };
    let value = trim_separators(value);
    let value = match value.to_ascii_lowercase().as_str() {
        "" | "none" | "n/a" | "na" => None,
        _ => Some(value.to_string()),
    };
    let before = line[..pos].trim_end_matches(|c: char| c == '*' || c.is_whitespace());
    (before.to_string(), value)
}

/// Drops leading separators and trailing markup, keeping sentence punctuation.
fn clean_prose(s: &str) -> &str {
    s.trim_start_matches(|c: char| {
        c.is_whitespace() || matches!(c, '.' | ':' | '-' | '\u{2014}' | '\u{2013}' | ',' | ';' | '*' | '#' | ')')
    })
    .trim_end_matches(|c: char| c.is_whitespace() || c == '*')
}

fn strip_field_name<'a>(s: &'a str, name: &str) -> &'a str {
    let lower = s.to_ascii_lowercase();
    if lower.starts_with(name) {
        let rest = s[name.len()..].trim_start_matches(|c: char| c == '*' || c.is_whitespace());
        if let Some(rest) = rest.strip_prefix(':') {
            return rest;
        }
    }
    s
}

/// Extracts label, justification and optional contribution type from a raw
/// model response.
///
/// The label comes from the first line holding a label token. Negative
/// spellings ("Non-Relevant", "not relevant", ...) are checked before the
/// bare "Relevant". A response without any token is `Unparseable`.
pub fn parse_response(raw: &str) -> ParseOutcome {
    let mut label = None;
    let mut contribution_type = None;
    let mut prose: Vec<String> = Vec::new();

    for line in raw.lines() {
        let (line, contribution) = split_contribution(line);
        if contribution.is_some() && contribution_type.is_none() {
            contribution_type = contribution;
        }
        if label.is_none() {
            let lower = line.to_ascii_lowercase();
            if let Some((found, _, end)) = find_label(&lower) {
                label = Some(found);
                prose.push(line[end..].to_string());
                continue;
            }
            // Anything before the label line is preamble.
            continue;
        }
        prose.push(line);
    }

    let Some(label) = label else {
        return ParseOutcome::Unparseable(raw.to_string());
    };

    let justification = prose
        .iter()
        .map(|l| clean_prose(l))
        .map(|l| clean_prose(strip_field_name(l, "justification")))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n");

    ParseOutcome::Parsed(ParsedResponse { label, justification, contribution_type })
}

/// One model's stored decision for one (document, topic) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub doc_id: String,
    pub topic: TopicId,
    pub model_id: String,
    pub label: LabelOutcome,
    #[serde(default)]
    pub justification: String,
    #[serde(default)]
    pub contribution_type: Option<String>,
    #[serde(default)]
    pub raw_response: String,
}

impl LabelRecord {
    /// Builds a record from a raw response, parsing it.
    pub fn from_response(doc_id: &str, topic: &str, model_id: &str, raw: &str) -> Self {
        let (label, justification, contribution_type) = match parse_response(raw) {
            ParseOutcome::Parsed(p) => (p.label.into(), p.justification, p.contribution_type),
            ParseOutcome::Unparseable(_) => (LabelOutcome::Unparseable, String::new(), None),
        };
        Self {
            doc_id: doc_id.into(),
            topic: topic.into(),
            model_id: model_id.into(),
            label,
            justification,
            contribution_type,
            raw_response: raw.into(),
        }
    }

    pub fn failed(doc_id: &str, topic: &str, model_id: &str, reason: &str) -> Self {
        Self {
            doc_id: doc_id.into(),
            topic: topic.into(),
            model_id: model_id.into(),
            label: LabelOutcome::Failed,
            justification: reason.into(),
            contribution_type: None,
            raw_response: String::new(),
        }
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.doc_id, &self.topic)
    }
}

/// One aligned decision pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPair {
    pub doc_id: String,
    pub topic: TopicId,
    pub label_a: Label,
    pub label_b: Label,
}

/// Decisions of two models over a shared (doc_id, topic) key space,
/// sorted by (topic, doc_id).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedLabelSet {
    pub model_a: String,
    pub model_b: String,
    pairs: Vec<LabelPair>,
}

impl PairedLabelSet {
    pub fn new(model_a: impl Into<String>, model_b: impl Into<String>, mut pairs: Vec<LabelPair>) -> Result<Self> {
        pairs.sort_by(|x, y| (&x.topic, &x.doc_id).cmp(&(&y.topic, &y.doc_id)));
        if let Some(w) = pairs.windows(2).find(|w| w[0].topic == w[1].topic && w[0].doc_id == w[1].doc_id) {
            return Err(Error::Integrity(format!("pair key ({:?}, {:?}) appears twice", w[0].doc_id, w[0].topic)));
        }
        Ok(Self { model_a: model_a.into(), model_b: model_b.into(), pairs })
    }

    pub fn pairs(&self) -> &[LabelPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn topics(&self) -> BTreeSet<TopicId> {
        self.pairs.iter().map(|p| p.topic.clone()).collect()
    }

    /// Pairs for one topic only.
    pub fn for_topic(&self, topic: &str) -> PairedLabelSet {
        Self {
            model_a: self.model_a.clone(),
            model_b: self.model_b.clone(),
            pairs: self.pairs.iter().filter(|p| p.topic == topic).cloned().collect(),
        }
    }

    /// The same pairs with the two models' roles exchanged.
    pub fn swapped(&self) -> PairedLabelSet {
        Self {
            model_a: self.model_b.clone(),
            model_b: self.model_a.clone(),
            pairs: self
                .pairs
                .iter()
                .map(|p| LabelPair {
                    doc_id: p.doc_id.clone(),
                    topic: p.topic.clone(),
                    label_a: p.label_b,
                    label_b: p.label_a,
                })
                .collect(),
        }
    }
}

/// Result of joining two label sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    pub paired: PairedLabelSet,
    /// Usable records in A with no usable partner in B.
    pub unmatched_a: usize,
    pub unmatched_b: usize,
    /// Unparseable or failed records left out of the join.
    pub excluded_a: usize,
    pub excluded_b: usize,
}

type LabelIndex<'a> = BTreeMap<(&'a str, &'a str), Option<Label>>;

fn index_set<'a>(records: &'a [LabelRecord], side: &str) -> Result<(String, LabelIndex<'a>)> {
    let mut model: Option<&str> = None;
    let mut index = BTreeMap::new();
    for r in records {
        match model {
            None => model = Some(&r.model_id),
            Some(m) if m != r.model_id => {
                return Err(Error::Integrity(format!("label set {side} mixes models {m:?} and {:?}", r.model_id)));
            }
            Some(_) => {}
        }
        if index.insert(r.key(), r.label.label()).is_some() {
            return Err(Error::Integrity(format!("label set {side} holds ({:?}, {:?}) twice", r.doc_id, r.topic)));
        }
    }
    Ok((model.unwrap_or_default().to_string(), index))
}

/// Inner join of two single-model label sets on (doc_id, topic).
/// Unparseable and failed records never pair.
pub fn pair_labels(set_a: &[LabelRecord], set_b: &[LabelRecord]) -> Result<Pairing> {
    let (model_a, a) = index_set(set_a, "A")?;
    let (model_b, b) = index_set(set_b, "B")?;

    let mut pairs = Vec::new();
    let (mut unmatched_a, mut excluded_a) = (0, 0);
    for (key, label_a) in &a {
        let Some(label_a) = label_a else {
            excluded_a += 1;
            continue;
        };
        match b.get(key) {
            Some(Some(label_b)) => pairs.push(LabelPair {
                doc_id: key.0.to_string(),
                topic: key.1.to_string(),
                label_a: *label_a,
                label_b: *label_b,
            }),
            _ => unmatched_a += 1,
        }
    }
    let excluded_b = b.values().filter(|l| l.is_none()).count();
    let unmatched_b = b.iter().filter(|(key, l)| l.is_some() && !matches!(a.get(*key), Some(Some(_)))).count();

    Ok(Pairing {
        paired: PairedLabelSet::new(model_a, model_b, pairs)?,
        unmatched_a,
        unmatched_b,
        excluded_a,
        excluded_b,
    })
}
