//! News samples and corpus-level operations: ingestion, cleaning, and
//! stratified splitting.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::hashing;

/// Gold label of a sample: verified truthful vs disinformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Veracity {
    Real,
    Fake,
}

/// Surface form of the text: short social-media post or full news article.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentType {
    SocialMedia,
    NewsArticle,
}

/// Whether the event the sample describes predates the detector training
/// cutoff (in-distribution) or postdates it (out-of-distribution).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Era {
    PreCutoff,
    PostCutoff,
}

/// Provenance of the text: written by people or generated by a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Human,
    Llm,
}

/// How far a generated sample departs from its source article.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Minor,
    Major,
    Critical,
}

impl fmt::Display for Veracity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Veracity::Real => "real",
            Veracity::Fake => "fake",
        })
    }
}

impl fmt::Display for ContentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContentType::SocialMedia => "social_media",
            ContentType::NewsArticle => "news_article",
        })
    }
}

impl fmt::Display for Era {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Era::PreCutoff => "pre_cutoff",
            Era::PostCutoff => "post_cutoff",
        })
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Human => "human",
            Origin::Llm => "llm",
        })
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Minor => "minor",
            Severity::Major => "major",
            Severity::Critical => "critical",
        })
    }
}

impl Veracity {
    pub fn from_token(token: &str) -> Option<Self> {
        match token.to_ascii_lowercase().as_str() {
            "real" => Some(Veracity::Real),
            "fake" => Some(Veracity::Fake),
            _ => None,
        }
    }
}

impl ContentType {
    pub fn from_token(token: &str) -> Option<Self> {
        match token.to_ascii_lowercase().as_str() {
            "social_media" => Some(ContentType::SocialMedia),
            "news_article" => Some(ContentType::NewsArticle),
            _ => None,
        }
    }
}

impl Era {
    pub fn from_token(token: &str) -> Option<Self> {
        match token.to_ascii_lowercase().as_str() {
            "pre_cutoff" => Some(Era::PreCutoff),
            "post_cutoff" => Some(Era::PostCutoff),
            _ => None,
        }
    }
}

impl Origin {
    pub fn from_token(token: &str) -> Option<Self> {
        match token.to_ascii_lowercase().as_str() {
            "human" => Some(Origin::Human),
            "llm" => Some(Origin::Llm),
            _ => None,
        }
    }
}

impl Severity {
    pub fn from_token(token: &str) -> Option<Self> {
        match token.to_ascii_lowercase().as_str() {
            "minor" => Some(Severity::Minor),
            "major" => Some(Severity::Major),
            "critical" => Some(Severity::Critical),
            _ => None,
        }
    }
}

/// One news item, human-written or generated, with full strata metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsSample {
    /// Deterministic content hash; identical content yields an identical id.
    pub id: String,
    pub text: String,
    pub veracity: Veracity,
    pub content_type: ContentType,
    pub era: Era,
    pub origin: Origin,
    /// Present exactly when `origin` is `llm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<Severity>,
    /// Name of the corpus the sample (or its source) came from.
    pub source_dataset: String,
    /// For generated samples, the id of the human source article.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("sample {id}: {message}")]
    InvalidSample { id: String, message: String },
    #[error("duplicate sample id {0}")]
    DuplicateId(String),
    #[error("sample {child}: parent {parent} {problem}")]
    Lineage {
        child: String,
        parent: String,
        problem: String,
    },
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    BadRatios(Vec<f64>),
    #[error("sample {0} is post_cutoff; stratified splitting covers pre_cutoff samples only")]
    EraViolation(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
}

impl NewsSample {
    /// Build a sample with its deterministic content-hash id.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        text: impl Into<String>,
        veracity: Veracity,
        content_type: ContentType,
        era: Era,
        origin: Origin,
        severity: Option<Severity>,
        source_dataset: impl Into<String>,
        parent_id: Option<String>,
    ) -> Result<Self, CorpusError> {
        let sample = NewsSample {
            id: String::new(),
            text: text.into(),
            veracity,
            content_type,
            era,
            origin,
            severity,
            source_dataset: source_dataset.into(),
            parent_id,
        };
        let sample = NewsSample {
            id: sample.content_id(),
            ..sample
        };
        sample.validate()?;
        Ok(sample)
    }

    /// Deterministic id derived from every semantic field, so re-ingesting
    /// the same content always reproduces the same id.
    pub fn content_id(&self) -> String {
        let severity = self.severity.map(|s| s.to_string()).unwrap_or_default();
        let parent = self.parent_id.clone().unwrap_or_default();
        let digest = hashing::sha256_fields(&[
            "news_sample",
            &self.text,
            &self.veracity.to_string(),
            &self.content_type.to_string(),
            &self.era.to_string(),
            &self.origin.to_string(),
            &severity,
            &self.source_dataset,
            &parent,
        ]);
        digest[..32].to_string()
    }

    /// Check the per-sample invariants (non-empty fields, severity/parent
    /// present iff the sample is model-generated).
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |message: &str| {
            Err(CorpusError::InvalidSample {
                id: self.id.clone(),
                message: message.to_string(),
            })
        };
        if self.id.is_empty() {
            return fail("empty id");
        }
        if self.text.trim().is_empty() {
            return fail("empty text");
        }
        if self.source_dataset.is_empty() {
            return fail("empty source_dataset");
        }
        match self.origin {
            Origin::Human => {
                if self.severity.is_some() {
                    return fail("human sample must not carry severity");
                }
                if self.parent_id.is_some() {
                    return fail("human sample must not carry parent_id");
                }
            }
            Origin::Llm => {
                if self.severity.is_none() {
                    return fail("llm sample must carry severity");
                }
                if self.parent_id.is_none() {
                    return fail("llm sample must carry parent_id");
                }
            }
        }
        Ok(())
    }
}

/// Id-keyed view of a corpus, used to resolve generated samples back to
/// their human source articles.
pub struct SampleIndex {
    by_id: HashMap<String, NewsSample>,
}

impl SampleIndex {
    pub fn build(samples: &[NewsSample]) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(samples.len());
        for sample in samples {
            if by_id.insert(sample.id.clone(), sample.clone()).is_some() {
                return Err(CorpusError::DuplicateId(sample.id.clone()));
            }
        }
        Ok(SampleIndex { by_id })
    }

    pub fn get(&self, id: &str) -> Option<&NewsSample> {
        self.by_id.get(id)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// Text of the human source article behind a generated sample.
    pub fn parent_text(&self, sample: &NewsSample) -> Result<&str, CorpusError> {
        let parent_id = sample.parent_id.as_deref().ok_or_else(|| CorpusError::InvalidSample {
            id: sample.id.clone(),
            message: "missing parent_id".to_string(),
        })?;
        let parent = self.by_id.get(parent_id).ok_or_else(|| CorpusError::Lineage {
            child: sample.id.clone(),
            parent: parent_id.to_string(),
            problem: "not found".to_string(),
        })?;
        Ok(&parent.text)
    }
}

/// Check that every `parent_id` points at an existing human-written sample
/// labeled real; generation never seeds from anything else.
pub fn validate_lineage(samples: &[NewsSample]) -> Result<(), CorpusError> {
    let by_id: HashMap<&str, &NewsSample> =
        samples.iter().map(|s| (s.id.as_str(), s)).collect();
    for sample in samples {
        if let Some(parent_id) = sample.parent_id.as_deref() {
            let parent = by_id.get(parent_id).ok_or_else(|| CorpusError::Lineage {
                child: sample.id.clone(),
                parent: parent_id.to_string(),
                problem: "not found".to_string(),
            })?;
            if parent.origin != Origin::Human || parent.veracity != Veracity::Real {
                return Err(CorpusError::Lineage {
                    child: sample.id.clone(),
                    parent: parent_id.to_string(),
                    problem: format!(
                        "must be human-written and real, got {}/{}",
                        parent.origin, parent.veracity
                    ),
                });
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

/// A row the ingester could not turn into a sample, with enough context to
/// find and fix it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowDiagnostic {
    /// 1-based line number in the source file.
    pub line: usize,
    /// Canonical name of the offending field, when one can be singled out.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

/// Result of ingesting one file: accepted samples plus per-row diagnostics
/// for everything rejected.
#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub samples: Vec<NewsSample>,
    pub diagnostics: Vec<RowDiagnostic>,
}

/// Raw row shape accepted from source corpora. `label` and `type` are
/// accepted as aliases for the canonical field names.
#[derive(Debug, Deserialize)]
struct RawRow {
    text: Option<String>,
    #[serde(alias = "label")]
    veracity: Option<String>,
    #[serde(alias = "type")]
    content_type: Option<String>,
    era: Option<String>,
    #[serde(alias = "dataset")]
    source_dataset: Option<String>,
    origin: Option<String>,
    severity: Option<String>,
    parent_id: Option<String>,
}

/// Read a JSON-lines corpus file, mapping each row to a [`NewsSample`].
///
/// Rows that cannot be mapped are reported as diagnostics, never silently
/// dropped. `schema_tag` names the source corpus and becomes
/// `source_dataset` for rows that do not carry their own.
pub fn ingest(path: &Path, schema_tag: &str) -> Result<IngestOutcome, CorpusError> {
    let content = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut outcome = IngestOutcome::default();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_row(line, schema_tag) {
            Ok(sample) => outcome.samples.push(sample),
            Err((field, message)) => outcome.diagnostics.push(RowDiagnostic {
                line: line_no,
                field,
                message,
            }),
        }
    }
    Ok(outcome)
}

fn parse_row(line: &str, schema_tag: &str) -> Result<NewsSample, (Option<String>, String)> {
    let row: RawRow = serde_json::from_str(line)
        .map_err(|e| (None, format!("not a valid JSON row: {e}")))?;

    fn required<T>(
        field: &str,
        raw: Option<String>,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<T, (Option<String>, String)> {
        let value = raw.ok_or_else(|| {
            (
                Some(field.to_string()),
                format!("missing required field `{field}`"),
            )
        })?;
        parse(&value).ok_or_else(|| {
            (
                Some(field.to_string()),
                format!("invalid value {value:?} for field `{field}`"),
            )
        })
    }

    let text = row
        .text
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| {
            (
                Some("text".to_string()),
                "missing required field `text`".to_string(),
            )
        })?;
    let veracity = required("veracity", row.veracity, Veracity::from_token)?;
    let content_type = required("content_type", row.content_type, ContentType::from_token)?;
    let era = required("era", row.era, Era::from_token)?;
    let origin = match row.origin {
        None => Origin::Human,
        Some(raw) => Origin::from_token(&raw).ok_or_else(|| {
            (
                Some("origin".to_string()),
                format!("invalid value {raw:?} for field `origin`"),
            )
        })?,
    };
    let severity = match row.severity {
        None => None,
        Some(raw) => Some(Severity::from_token(&raw).ok_or_else(|| {
            (
                Some("severity".to_string()),
                format!("invalid value {raw:?} for field `severity`"),
            )
        })?),
    };
    let source_dataset = row
        .source_dataset
        .unwrap_or_else(|| schema_tag.to_string());

    NewsSample::new(
        text,
        veracity,
        content_type,
        era,
        origin,
        severity,
        source_dataset,
        row.parent_id,
    )
    .map_err(|e| (None, e.to_string()))
}

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

/// Why the cleaner dropped a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    Duplicate,
    Boilerplate,
    Length,
}

impl fmt::Display for RemovalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RemovalReason::Duplicate => "duplicate",
            RemovalReason::Boilerplate => "boilerplate",
            RemovalReason::Length => "length",
        })
    }
}

/// A dropped sample together with the rule that dropped it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemovedSample {
    pub sample: NewsSample,
    pub reason: RemovalReason,
}

#[derive(Debug)]
pub struct CleanOutcome {
    pub kept: Vec<NewsSample>,
    pub removed: Vec<RemovedSample>,
}

/// Cleaning rules. The boilerplate list ships with the scraping-artifact
/// banner that plagues crawled news corpora; extend it per corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanConfig {
    pub max_tokens: usize,
    pub boilerplate_phrases: Vec<String>,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            max_tokens: 2000,
            boilerplate_phrases: vec![
                "this website is using a security service".to_string(),
            ],
        }
    }
}

/// Number of whitespace-delimited tokens; the default length gauge.
pub fn whitespace_token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Case-fold and collapse runs of whitespace, the equality used for
/// duplicate detection and boilerplate matching.
fn normalize_text(text: &str) -> String {
    text.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Drop duplicates, boilerplate, and over-long samples, in that order.
///
/// Every input sample lands in exactly one of `kept` or `removed`; the first
/// occurrence of a duplicated text is the one that survives to the later
/// rules.
pub fn clean(samples: Vec<NewsSample>, config: &CleanConfig) -> CleanOutcome {
    clean_with_tokenizer(samples, config, &whitespace_token_count)
}

/// [`clean`] with a caller-supplied token counter (for corpora measured in
/// model tokens rather than whitespace tokens).
pub fn clean_with_tokenizer(
    samples: Vec<NewsSample>,
    config: &CleanConfig,
    token_count: &(dyn Fn(&str) -> usize + Sync),
) -> CleanOutcome {
    let mut kept = Vec::with_capacity(samples.len());
    let mut removed = Vec::new();

    // Pass 1: exact duplicates by normalized text, first occurrence wins.
    let normalized = exec::map_ordered(&samples, |s| normalize_text(&s.text));
    let mut seen: HashSet<String> = HashSet::with_capacity(samples.len());
    let mut survivors = Vec::with_capacity(samples.len());
    for (sample, norm) in samples.into_iter().zip(normalized) {
        if seen.insert(norm.clone()) {
            survivors.push((sample, norm));
        } else {
            removed.push(RemovedSample {
                sample,
                reason: RemovalReason::Duplicate,
            });
        }
    }

    // Pass 2 and 3: boilerplate phrases, then length, on the survivors.
    let boilerplate: Vec<String> = config
        .boilerplate_phrases
        .iter()
        .map(|p| normalize_text(p))
        .filter(|p| !p.is_empty())
        .collect();
    let verdicts = exec::map_ordered(&survivors, |(sample, norm)| {
        if boilerplate.iter().any(|phrase| norm.contains(phrase)) {
            Some(RemovalReason::Boilerplate)
        } else if token_count(&sample.text) > config.max_tokens {
            Some(RemovalReason::Length)
        } else {
            None
        }
    });
    for ((sample, _), verdict) in survivors.into_iter().zip(verdicts) {
        match verdict {
            None => kept.push(sample),
            Some(reason) => removed.push(RemovedSample { sample, reason }),
        }
    }

    CleanOutcome { kept, removed }
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Dataset partition a sample is assigned to. Pre-cutoff samples go to
/// `train`/`validation`/`test`; post-cutoff samples go to `ood_full` intact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
    OodFull,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
            Split::OodFull => "ood_full",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub sample_id: String,
    pub split: Split,
}

#[derive(Debug, Default)]
pub struct SplitOutcome {
    /// One assignment per input sample, sorted by sample id.
    pub assignments: Vec<SplitAssignment>,
    /// Strata too small to split, and anything else worth surfacing.
    pub warnings: Vec<String>,
}

/// Train/validation/test proportions; must be non-negative and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            validation: 0.2,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let parts = [self.train, self.validation, self.test];
        let sum: f64 = parts.iter().sum();
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::BadRatios(parts.to_vec()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct StratumKey {
    veracity: Veracity,
    content_type: ContentType,
    origin: Origin,
    severity: Option<Severity>,
}

impl fmt::Display for StratumKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let severity = self
            .severity
            .map(|s| s.to_string())
            .unwrap_or_else(|| "-".to_string());
        write!(
            f,
            "{}/{}/{}/{}",
            self.veracity, self.content_type, self.origin, severity
        )
    }
}

/// Allocate `total` slots to the ratio buckets by largest remainder: floor
/// every target, then hand the leftover slots to the largest fractional
/// remainders. `tie_order[i]` ranks bucket `i` when remainders tie exactly.
fn largest_remainder(total: usize, ratios: &[f64], tie_order: &[usize]) -> Vec<usize> {
    let mut counts: Vec<usize> = Vec::with_capacity(ratios.len());
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(ratios.len());
    for (i, ratio) in ratios.iter().enumerate() {
        let target = total as f64 * ratio;
        let floor = target.floor();
        counts.push(floor as usize);
        remainders.push((target - floor, i));
    }
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        remainders[b]
            .0
            .partial_cmp(&remainders[a].0)
            .unwrap()
            .then(tie_order[a].cmp(&tie_order[b]))
    });
    for &bucket in order.iter().take(total - assigned) {
        counts[bucket] += 1;
    }
    counts
}

/// Seed a per-stratum RNG from the run seed and the stratum key, so each
/// stratum shuffles independently and the whole split is reproducible.
fn stratum_rng(seed: u64, key: &StratumKey) -> ChaCha8Rng {
    let digest = hashing::sha256_fields(&["split", &seed.to_string(), &key.to_string()]);
    let mut seed_bytes = [0u8; 32];
    hex::decode_to_slice(&digest, &mut seed_bytes).expect("sha256 hex is 32 bytes");
    ChaCha8Rng::from_seed(seed_bytes)
}

/// Split pre-cutoff samples into train/validation/test, stratified jointly
/// by (veracity, content_type, origin, severity).
///
/// Within each stratum, bucket sizes follow the ratios by largest-remainder
/// rounding (so each is within one sample of exact), membership is decided
/// by a stratum-local seeded shuffle, and strata of fewer than three samples
/// go entirely to train with a warning rather than producing degenerate
/// buckets.
pub fn stratified_split(
    samples: &[NewsSample],
    ratios: &SplitRatios,
    seed: u64,
) -> Result<SplitOutcome, CorpusError> {
    ratios.validate()?;
    if let Some(sample) = samples.iter().find(|s| s.era == Era::PostCutoff) {
        return Err(CorpusError::EraViolation(sample.id.clone()));
    }

    let mut strata: BTreeMap<StratumKey, Vec<&NewsSample>> = BTreeMap::new();
    for sample in samples {
        let key = StratumKey {
            veracity: sample.veracity,
            content_type: sample.content_type,
            origin: sample.origin,
            severity: sample.severity,
        };
        strata.entry(key).or_default().push(sample);
    }

    let mut outcome = SplitOutcome::default();
    for (key, members) in &strata {
        let mut ids: Vec<&str> = members.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();

        if ids.len() < 3 {
            outcome.warnings.push(format!(
                "stratum {key}: only {} sample(s); assigned all to train",
                ids.len()
            ));
            for id in ids {
                outcome.assignments.push(SplitAssignment {
                    sample_id: id.to_string(),
                    split: Split::Train,
                });
            }
            continue;
        }

        let mut rng = stratum_rng(seed, key);
        // Fixed draw order: tie permutation first, then the membership
        // shuffle, so both stay stable for a given (seed, stratum).
        let mut tie_order: Vec<usize> = (0..3).collect();
        tie_order.shuffle(&mut rng);
        let mut tie_rank = vec![0usize; 3];
        for (rank, &bucket) in tie_order.iter().enumerate() {
            tie_rank[bucket] = rank;
        }
        ids.shuffle(&mut rng);

        let counts = largest_remainder(
            ids.len(),
            &[ratios.train, ratios.validation, ratios.test],
            &tie_rank,
        );
        let splits = [Split::Train, Split::Validation, Split::Test];
        let mut cursor = 0;
        for (split, &count) in splits.iter().zip(&counts) {
            for id in &ids[cursor..cursor + count] {
                outcome.assignments.push(SplitAssignment {
                    sample_id: id.to_string(),
                    split: *split,
                });
            }
            cursor += count;
        }
    }

    outcome
        .assignments
        .sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(outcome)
}

/// Split a mixed-era corpus: pre-cutoff samples are stratified into
/// train/validation/test, post-cutoff samples all land in `ood_full` so the
/// out-of-distribution front stays intact.
pub fn split_corpus(
    samples: &[NewsSample],
    ratios: &SplitRatios,
    seed: u64,
) -> Result<SplitOutcome, CorpusError> {
    let (pre, post): (Vec<&NewsSample>, Vec<&NewsSample>) =
        samples.iter().partition(|s| s.era == Era::PreCutoff);
    let pre_owned: Vec<NewsSample> = pre.into_iter().cloned().collect();
    let mut outcome = stratified_split(&pre_owned, ratios, seed)?;
    for sample in post {
        outcome.assignments.push(SplitAssignment {
            sample_id: sample.id.clone(),
            split: Split::OodFull,
        });
    }
    outcome
        .assignments
        .sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(outcome)
}
