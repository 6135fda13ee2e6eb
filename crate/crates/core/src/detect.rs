//! Turning raw detector output into labels: tolerant token scanning for
//! real/fake verdicts, yes/no parsing for entailment judges, and the
//! result record the evaluator consumes.

use serde::{Deserialize, Serialize};

use crate::prompt::Strategy;

/// Parsed verdict of one detection call. `unknown` marks output with no
/// recognizable label; scoring treats it as a miss for the gold class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Real,
    Fake,
    Unknown,
}

/// Which labeled token decides when an answer contains several: the first
/// mention (default — verdict-first answers) or the last (conclusion-last
/// answers). Recorded per run so results are interpretable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    #[default]
    FirstToken,
    LastToken,
}

/// One detection call: which sample, which provider and strategy, the raw
/// model output, and what it parsed to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub sample_id: String,
    pub provider_id: String,
    pub strategy: Strategy,
    pub raw_output: String,
    pub predicted: Prediction,
    /// Parser side-channel: refusals, transport errors, confidence figures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_note: Option<String>,
}

/// Scan for the standalone token (case-insensitive, bounded by
/// non-alphanumerics) that decides between the positive and negative
/// vocabularies. Returns `None` when neither vocabulary appears.
pub fn parse_binary_with(
    raw: &str,
    positive: &[&str],
    negative: &[&str],
    rule: LabelRule,
) -> Option<bool> {
    let matched = |token: &str| {
        if positive.iter().any(|p| token.eq_ignore_ascii_case(p)) {
            Some(true)
        } else if negative.iter().any(|n| token.eq_ignore_ascii_case(n)) {
            Some(false)
        } else {
            None
        }
    };
    let tokens = raw.split(|c: char| !c.is_alphanumeric());
    match rule {
        LabelRule::FirstToken => tokens.filter_map(matched).next(),
        LabelRule::LastToken => tokens.filter_map(matched).last(),
    }
}

/// Parse a real/fake verdict: `true`/`real` mean real, `false`/`fake` mean
/// fake, position under `rule` decides when both appear.
pub fn parse_label_with(raw: &str, rule: LabelRule) -> Prediction {
    match parse_binary_with(raw, &["true", "real"], &["false", "fake"], rule) {
        Some(true) => Prediction::Real,
        Some(false) => Prediction::Fake,
        None => Prediction::Unknown,
    }
}

/// [`parse_label_with`] under the default first-token rule.
pub fn parse_label(raw: &str) -> Prediction {
    parse_label_with(raw, LabelRule::FirstToken)
}

/// Parse an entailment judge's yes/no answer.
pub fn parse_yes_no(raw: &str, rule: LabelRule) -> Option<bool> {
    parse_binary_with(raw, &["yes"], &["no"], rule)
}

/// Pull a 0-100 confidence figure out of an answer, for strategies that ask
/// for one. The number is reported in `parse_note`, never scored.
pub fn extract_confidence(raw: &str) -> Option<u32> {
    let lower = raw.to_lowercase();
    let at = lower.find("confidence")?;
    let window: String = lower[at..].chars().take(40).collect();
    let digits: String = window
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse::<u32>().ok().filter(|v| *v <= 100)
}
