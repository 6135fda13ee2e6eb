//! Consistency filtering for generated news: entailment voting, hybrid
//! alignment thresholds, the logical and factual filters built on them, and
//! the report-only semantic diagnostics.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Veracity;
use crate::hashing;

/// Default acceptance thresholds, used when a run does not compute its own
/// from calibration scores.
pub const DEFAULT_THETA_FAKE: f64 = 0.36;
pub const DEFAULT_THETA_REAL: f64 = 0.61;

#[derive(Debug, Error)]
pub enum PurifyError {
    #[error("score list `{name}` needs at least 4 values, got {got}")]
    TooFewScores { name: &'static str, got: usize },
    #[error("score list `{name}` contains {value}, outside [0,1]")]
    ScoreOutOfRange { name: &'static str, value: f64 },
    #[error("alignment score {0} is outside [0,1]")]
    AlignOutOfRange(f64),
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("embeddings must be non-empty")]
    EmptyEmbedding,
    #[error("embedding has zero norm; semantic distance is undefined")]
    ZeroNorm,
}

// ---------------------------------------------------------------------------
// Entailment voting
// ---------------------------------------------------------------------------

/// One judge's reading of whether the generated text entails its source.
/// `abstain` covers judges whose output could not be parsed as yes/no.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeVote {
    Entail,
    NotEntail,
    Abstain,
}

impl JudgeVote {
    pub const ALL: [JudgeVote; 3] = [JudgeVote::Entail, JudgeVote::NotEntail, JudgeVote::Abstain];
}

/// A vote attributed to the judge model that cast it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub judge_id: String,
    pub vote: JudgeVote,
}

/// Outcome of the vote across judges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliDecision {
    Entail,
    NotEntail,
    Unresolved,
}

/// Resolve a set of judge votes by strict majority of the non-abstaining
/// judges: more entail than not-entail votes decides entail, the reverse
/// decides not-entail, and an exact tie (including everyone abstaining)
/// stays unresolved.
pub fn nli_decision(votes: &[JudgeVote]) -> NliDecision {
    let entail = votes.iter().filter(|v| **v == JudgeVote::Entail).count();
    let not_entail = votes.iter().filter(|v| **v == JudgeVote::NotEntail).count();
    match entail.cmp(&not_entail) {
        std::cmp::Ordering::Greater => NliDecision::Entail,
        std::cmp::Ordering::Less => NliDecision::NotEntail,
        std::cmp::Ordering::Equal => NliDecision::Unresolved,
    }
}

// ---------------------------------------------------------------------------
// Filters
// ---------------------------------------------------------------------------

/// Why a sample left the pipeline; `ok` marks a kept sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurifyReason {
    Ok,
    LogicalMisalignment,
    FactualMisalignment,
    VoteUnresolved,
}

impl fmt::Display for PurifyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PurifyReason::Ok => "ok",
            PurifyReason::LogicalMisalignment => "logical_misalignment",
            PurifyReason::FactualMisalignment => "factual_misalignment",
            PurifyReason::VoteUnresolved => "vote_unresolved",
        })
    }
}

/// A filter's call on one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Keep,
    Remove(PurifyReason),
}

/// Logical filter: a sample survives only when its label agrees with the
/// entailment vote — real news must entail its source, fake news must not.
/// An unresolved vote removes the sample rather than guessing.
pub fn logical_filter(veracity: Veracity, decision: NliDecision) -> FilterDecision {
    match (veracity, decision) {
        (_, NliDecision::Unresolved) => FilterDecision::Remove(PurifyReason::VoteUnresolved),
        (Veracity::Real, NliDecision::Entail) | (Veracity::Fake, NliDecision::NotEntail) => {
            FilterDecision::Keep
        }
        _ => FilterDecision::Remove(PurifyReason::LogicalMisalignment),
    }
}

/// Factual filter: fake news must score at or below `theta_fake` (it should
/// not align with its source), real news at or above `theta_real` (it
/// should). Both boundaries are inclusive.
pub fn factual_filter(
    veracity: Veracity,
    align_score: f64,
    thresholds: &ThresholdConfig,
) -> Result<FilterDecision, PurifyError> {
    if !align_score.is_finite() || !(0.0..=1.0).contains(&align_score) {
        return Err(PurifyError::AlignOutOfRange(align_score));
    }
    let keep = match veracity {
        Veracity::Fake => align_score <= thresholds.theta_fake,
        Veracity::Real => align_score >= thresholds.theta_real,
    };
    Ok(if keep {
        FilterDecision::Keep
    } else {
        FilterDecision::Remove(PurifyReason::FactualMisalignment)
    })
}

// ---------------------------------------------------------------------------
// Hybrid thresholds
// ---------------------------------------------------------------------------

/// Where a threshold pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdProvenance {
    PaperDefault,
    Computed,
}

/// The acceptance thresholds the factual filter applies, with provenance so
/// runs are auditable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub theta_fake: f64,
    pub theta_real: f64,
    pub provenance: ThresholdProvenance,
    /// Digest of the calibration score lists for computed thresholds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs_digest: Option<String>,
}

impl ThresholdConfig {
    /// The published default pair (0.36, 0.61).
    pub fn defaults() -> ThresholdConfig {
        ThresholdConfig {
            theta_fake: DEFAULT_THETA_FAKE,
            theta_real: DEFAULT_THETA_REAL,
            provenance: ThresholdProvenance::PaperDefault,
            inputs_digest: None,
        }
    }
}

/// Which standard deviation enters the threshold formula. The default is
/// the sample (n-1) deviation; the population variant is exposed for
/// sensitivity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdMode {
    #[default]
    Sample,
    Population,
}

/// Linearly interpolated quantile of an ascending-sorted list (the
/// convention where the `p`-quantile sits at rank `(n-1)p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&p));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = (n - 1) as f64 * p;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Standard deviation via Welford's recurrence. The incremental form keeps
/// a constant list at exactly zero deviation (no cancellation residue), a
/// property the degenerate threshold cases rely on.
pub fn std_dev(values: &[f64], mode: StdMode) -> f64 {
    let n = values.len();
    debug_assert!(n >= 2);
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for (i, &value) in values.iter().enumerate() {
        let delta = value - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (value - mean);
    }
    let denom = match mode {
        StdMode::Sample => (n - 1) as f64,
        StdMode::Population => n as f64,
    };
    (m2 / denom).sqrt()
}

fn validate_scores(name: &'static str, scores: &[f64]) -> Result<(), PurifyError> {
    if scores.len() < 4 {
        return Err(PurifyError::TooFewScores {
            name,
            got: scores.len(),
        });
    }
    for &value in scores {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(PurifyError::ScoreOutOfRange { name, value });
        }
    }
    Ok(())
}

/// Derive the acceptance thresholds from calibration alignment scores of
/// generated fake and real news:
///
/// ```text
/// theta_fake = (Q90(fake) + (IQR(fake) + sigma(fake))) / 2
/// theta_real = (Q90(real) + (IQR(real) - sigma(real))) / 2
/// ```
///
/// where IQR is Q75 - Q25, quantiles use linear interpolation, sigma is the
/// sample standard deviation, and both results are clamped into [0,1]. The
/// fake threshold widens with spread (tolerating diverse fabrications); the
/// real threshold tightens with spread (demanding consistent fidelity).
pub fn compute_hybrid_thresholds(
    fake_scores: &[f64],
    real_scores: &[f64],
) -> Result<ThresholdConfig, PurifyError> {
    compute_hybrid_thresholds_with(fake_scores, real_scores, StdMode::Sample)
}

/// [`compute_hybrid_thresholds`] with an explicit deviation mode.
pub fn compute_hybrid_thresholds_with(
    fake_scores: &[f64],
    real_scores: &[f64],
    mode: StdMode,
) -> Result<ThresholdConfig, PurifyError> {
    validate_scores("fake_scores", fake_scores)?;
    validate_scores("real_scores", real_scores)?;

    let stats = |scores: &[f64]| {
        let mut sorted = scores.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q90 = quantile_sorted(&sorted, 0.90);
        let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        let sigma = std_dev(scores, mode);
        (q90, iqr, sigma)
    };
    let (q90_fake, iqr_fake, sigma_fake) = stats(fake_scores);
    let (q90_real, iqr_real, sigma_real) = stats(real_scores);

    let theta_fake = ((q90_fake + (iqr_fake + sigma_fake)) / 2.0).clamp(0.0, 1.0);
    let theta_real = ((q90_real + (iqr_real - sigma_real)) / 2.0).clamp(0.0, 1.0);

    let digest_fields: Vec<String> = std::iter::once("thresholds".to_string())
        .chain(fake_scores.iter().map(|v| hashing::canonical_f64(*v)))
        .chain(std::iter::once("|".to_string()))
        .chain(real_scores.iter().map(|v| hashing::canonical_f64(*v)))
        .collect();
    let refs: Vec<&str> = digest_fields.iter().map(String::as_str).collect();

    Ok(ThresholdConfig {
        theta_fake,
        theta_real,
        provenance: ThresholdProvenance::Computed,
        inputs_digest: Some(hashing::sha256_fields(&refs)),
    })
}

// ---------------------------------------------------------------------------
// Semantic diagnostics
// ---------------------------------------------------------------------------

/// Cosine similarity of two equal-dimension, nonzero embeddings.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, PurifyError> {
    if a.is_empty() || b.is_empty() {
        return Err(PurifyError::EmptyEmbedding);
    }
    if a.len() != b.len() {
        return Err(PurifyError::DimensionMismatch(a.len(), b.len()));
    }
    let mut dot = 0.0f64;
    let mut norm_a = 0.0f64;
    let mut norm_b = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(PurifyError::ZeroNorm);
    }
    Ok(dot / (norm_a.sqrt() * norm_b.sqrt()))
}

/// Semantic distance between source and generated embeddings:
/// `1 - cosine`, clamped into [0,1] (anti-parallel pairs would otherwise
/// reach 2; only the clamped value is reported).
pub fn semantic_distance(a: &[f64], b: &[f64]) -> Result<f64, PurifyError> {
    Ok((1.0 - cosine_similarity(a, b)?).clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Scores, verdicts, and the conservation ledger
// ---------------------------------------------------------------------------

/// Everything measured about one generated sample on its way through the
/// filter. Scores are absent when an earlier stage removed the sample or a
/// diagnostic backend failed; failures leave a note instead of a value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConsistencyScores {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nli_votes: Vec<JudgeVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contextual_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Ledger row: what happened to one sample and the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurifyVerdict {
    pub sample_id: String,
    pub kept: bool,
    pub reason: PurifyReason,
    pub scores: ConsistencyScores,
}

impl PurifyVerdict {
    pub fn keep(sample_id: impl Into<String>, scores: ConsistencyScores) -> PurifyVerdict {
        PurifyVerdict {
            sample_id: sample_id.into(),
            kept: true,
            reason: PurifyReason::Ok,
            scores,
        }
    }

    pub fn remove(
        sample_id: impl Into<String>,
        reason: PurifyReason,
        scores: ConsistencyScores,
    ) -> PurifyVerdict {
        debug_assert!(reason != PurifyReason::Ok);
        PurifyVerdict {
            sample_id: sample_id.into(),
            kept: false,
            reason,
            scores,
        }
    }
}

/// Stage-by-stage counts; `conserved` is the bookkeeping identity every run
/// must satisfy: input = kept + all removals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PurifySummary {
    pub input: usize,
    pub kept: usize,
    pub removed_logical_misalignment: usize,
    pub removed_vote_unresolved: usize,
    pub removed_factual_misalignment: usize,
}

impl PurifySummary {
    pub fn from_verdicts(verdicts: &[PurifyVerdict]) -> PurifySummary {
        let mut summary = PurifySummary {
            input: verdicts.len(),
            ..PurifySummary::default()
        };
        for verdict in verdicts {
            match verdict.reason {
                PurifyReason::Ok => summary.kept += 1,
                PurifyReason::LogicalMisalignment => summary.removed_logical_misalignment += 1,
                PurifyReason::VoteUnresolved => summary.removed_vote_unresolved += 1,
                PurifyReason::FactualMisalignment => summary.removed_factual_misalignment += 1,
            }
        }
        summary
    }

    pub fn removed(&self) -> usize {
        self.removed_logical_misalignment
            + self.removed_vote_unresolved
            + self.removed_factual_misalignment
    }

    pub fn conserved(&self) -> bool {
        self.input == self.kept + self.removed()
    }
}

/// A pluggable source-vs-generated scorer (alignment or contextual
/// faithfulness). Implementations wrap a remote endpoint, a local model
/// adapter, or a recorded fixture.
pub trait PairScorer: Send + Sync {
    fn name(&self) -> &str;
    /// Score in [0,1]; higher means the generated text tracks the source
    /// more closely.
    fn score(&self, source: &str, generated: &str) -> Result<f64, ScorerError>;
}

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("scorer {name}: returned {value}, outside [0,1]")]
    OutOfRange { name: String, value: f64 },
    #[error("scorer {name}: {message}")]
    Failed { name: String, message: String },
}
