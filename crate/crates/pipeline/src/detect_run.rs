//! Zero-shot detection runs: every evaluation sample through every
//! strategy and detector, with parse bookkeeping per cell.

use std::collections::BTreeMap;

use f3_core::corpus::NewsSample;
use f3_core::detect::{extract_confidence, parse_label_with, DetectionResult, LabelRule, Prediction};
use f3_core::exec;
use f3_core::prompt::{Catalog, Strategy, VariantId};
use f3_gateway::{Gateway, ProviderConfig, RecordStatus};
use serde::{Deserialize, Serialize};

use crate::PipelineError;

/// One completion awaiting interpretation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDetection {
    pub sample_id: String,
    pub provider_id: String,
    pub strategy: Strategy,
    pub status: RecordStatus,
    pub response_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Interpret one completion. Refusals and transport failures yield
/// `unknown` with the cause in `parse_note` — they stay in the result set
/// so evaluation sees the full denominator.
pub fn parse_raw(raw: &RawDetection, rule: LabelRule) -> DetectionResult {
    let (predicted, notes) = match raw.status {
        RecordStatus::Ok => {
            let predicted = parse_label_with(&raw.response_text, rule);
            let mut notes = Vec::new();
            if predicted == Prediction::Unknown {
                notes.push("no real/fake verdict found in the output".to_string());
            }
            if let Some(confidence) = extract_confidence(&raw.response_text) {
                notes.push(format!("stated confidence {confidence}"));
            }
            (predicted, notes)
        }
        RecordStatus::Refused => (Prediction::Unknown, vec!["provider refused".to_string()]),
        RecordStatus::Error => (
            Prediction::Unknown,
            vec![format!(
                "transport error: {}",
                raw.error.as_deref().unwrap_or("unspecified")
            )],
        ),
    };
    let parse_note = if notes.is_empty() { None } else { Some(notes.join("; ")) };
    DetectionResult {
        sample_id: raw.sample_id.clone(),
        provider_id: raw.provider_id.clone(),
        strategy: raw.strategy,
        raw_output: raw.response_text.clone(),
        predicted,
        parse_note,
    }
}

/// Parse a batch of completions, in parallel when the feature is on.
/// Output order matches input order.
pub fn parse_outputs(raws: &[RawDetection], rule: LabelRule) -> Vec<DetectionResult> {
    exec::map_ordered(raws, |raw| parse_raw(raw, rule))
}

/// Unknown-rate bookkeeping for one (detector, strategy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnknownRateEntry {
    pub provider_id: String,
    pub strategy: Strategy,
    pub total: usize,
    pub unknown: usize,
    pub unknown_rate: f64,
}

/// Results in (provider, strategy, sample) order plus the per-cell
/// unknown-rate ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixOutcome {
    pub results: Vec<DetectionResult>,
    pub ledger: Vec<UnknownRateEntry>,
}

/// Ask every detector, under every strategy, about every sample.
pub fn run_matrix(
    gateway: &mut Gateway,
    catalog: &Catalog,
    detectors: &[ProviderConfig],
    strategies: &[Strategy],
    samples: &[NewsSample],
    rule: LabelRule,
) -> Result<MatrixOutcome, PipelineError> {
    let mut raws = Vec::with_capacity(detectors.len() * strategies.len() * samples.len());
    for detector in detectors {
        for strategy in strategies {
            let variant = VariantId::Detection { strategy: *strategy };
            for sample in samples {
                let prompt = catalog.render_for(&variant, &sample.text)?;
                let record = gateway.complete(detector, &prompt)?;
                raws.push(RawDetection {
                    sample_id: sample.id.clone(),
                    provider_id: detector.provider_id.clone(),
                    strategy: *strategy,
                    status: record.status,
                    response_text: record.response_text,
                    error: record.error,
                });
            }
        }
    }
    let results = parse_outputs(&raws, rule);

    let mut cells: BTreeMap<(String, Strategy), (usize, usize)> = BTreeMap::new();
    for result in &results {
        let cell = cells
            .entry((result.provider_id.clone(), result.strategy))
            .or_default();
        cell.0 += 1;
        if result.predicted == Prediction::Unknown {
            cell.1 += 1;
        }
    }
    let ledger = cells
        .into_iter()
        .map(|((provider_id, strategy), (total, unknown))| UnknownRateEntry {
            provider_id,
            strategy,
            total,
            unknown,
            unknown_rate: unknown as f64 / total as f64,
        })
        .collect();
    Ok(MatrixOutcome { results, ledger })
}
