//! Generating paired real/fake variants of verified source articles.
//!
//! Each human-written, verified-real source article is rewritten under all
//! six generation variants: three paraphrase severities that preserve the
//! facts (labelled real) and three perturbation severities that distort
//! them (labelled fake). Every job lands in a ledger whether or not it
//! produced a sample.

use std::collections::HashMap;

use f3_core::corpus::{NewsSample, Origin, Veracity};
use f3_core::prompt::{generation_variants, Catalog, GenerationKind, VariantId};
use f3_gateway::{Gateway, ProviderConfig, RecordStatus};
use serde::{Deserialize, Serialize};

use crate::PipelineError;

/// How one generation job ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Ok,
    /// The model declined; counted, never re-prompted.
    Refused,
    Error,
}

/// Ledger row for one generation job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationEntry {
    pub job_id: String,
    pub parent_id: String,
    pub provider_id: String,
    pub variant: VariantId,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Samples plus the complete job ledger for one sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub samples: Vec<NewsSample>,
    pub ledger: Vec<GenerationEntry>,
}

impl GenerationOutcome {
    /// Generated sample id -> provider that generated it (first writer wins
    /// when identical content was produced twice).
    pub fn lineage(&self) -> HashMap<String, String> {
        let mut map = HashMap::new();
        for entry in &self.ledger {
            if let Some(sample_id) = &entry.sample_id {
                map.entry(sample_id.clone())
                    .or_insert_with(|| entry.provider_id.clone());
            }
        }
        map
    }
}

/// Paraphrases keep the story truthful; perturbations fabricate.
pub fn label_for(kind: GenerationKind) -> Veracity {
    match kind {
        GenerationKind::Paraphrase => Veracity::Real,
        GenerationKind::Perturbation => Veracity::Fake,
    }
}

fn job_id(source: &NewsSample, provider: &ProviderConfig, variant: &VariantId) -> String {
    format!("{}:{}:{}", source.id, variant, provider.provider_id)
}

/// Run one generation job. The source must be a human-written, verified
/// real article — generating from generated text would compound drift.
pub fn generate_one(
    gateway: &mut Gateway,
    catalog: &Catalog,
    provider: &ProviderConfig,
    source: &NewsSample,
    variant: &VariantId,
) -> Result<(GenerationEntry, Option<NewsSample>), PipelineError> {
    if source.origin != Origin::Human || source.veracity != Veracity::Real {
        return Err(PipelineError::BadSource { id: source.id.clone() });
    }
    let VariantId::Generation { kind, severity } = variant else {
        return Err(PipelineError::NotAGenerationVariant { variant: variant.to_string() });
    };

    let prompt = catalog.render_for(variant, &source.text)?;
    let record = gateway.complete(provider, &prompt)?;
    let mut entry = GenerationEntry {
        job_id: job_id(source, provider, variant),
        parent_id: source.id.clone(),
        provider_id: provider.provider_id.clone(),
        variant: *variant,
        status: JobStatus::Ok,
        sample_id: None,
        detail: None,
    };
    match record.status {
        RecordStatus::Refused => {
            entry.status = JobStatus::Refused;
            Ok((entry, None))
        }
        RecordStatus::Error => {
            entry.status = JobStatus::Error;
            entry.detail = record.error.clone();
            Ok((entry, None))
        }
        RecordStatus::Ok => {
            let text = record.response_text.trim();
            if text.is_empty() {
                entry.status = JobStatus::Error;
                entry.detail = Some("model returned an empty rewrite".to_string());
                return Ok((entry, None));
            }
            let sample = NewsSample::new(
                text,
                label_for(*kind),
                source.content_type,
                source.era,
                Origin::Llm,
                Some(*severity),
                source.source_dataset.clone(),
                Some(source.id.clone()),
            )?;
            entry.sample_id = Some(sample.id.clone());
            Ok((entry, Some(sample)))
        }
    }
}

/// Run every source through every generation variant for one provider.
/// Identical content produced twice (it has the same id) is kept once;
/// both ledger rows still point at it.
pub fn sweep(
    gateway: &mut Gateway,
    catalog: &Catalog,
    provider: &ProviderConfig,
    sources: &[NewsSample],
) -> Result<GenerationOutcome, PipelineError> {
    sweep_variants(gateway, catalog, provider, sources, &generation_variants())
}

/// [`sweep`] restricted to an explicit variant subset, in the given order.
pub fn sweep_variants(
    gateway: &mut Gateway,
    catalog: &Catalog,
    provider: &ProviderConfig,
    sources: &[NewsSample],
    variants: &[VariantId],
) -> Result<GenerationOutcome, PipelineError> {
    let mut outcome = GenerationOutcome::default();
    let mut seen = std::collections::HashSet::new();
    for source in sources {
        for variant in variants {
            let (entry, sample) = generate_one(gateway, catalog, provider, source, variant)?;
            outcome.ledger.push(entry);
            if let Some(sample) = sample {
                if seen.insert(sample.id.clone()) {
                    outcome.samples.push(sample);
                }
            }
        }
    }
    Ok(outcome)
}

/// Merge per-provider sweeps, dropping duplicate sample ids (identical
/// content) while keeping every ledger row.
pub fn merge_outcomes(outcomes: Vec<GenerationOutcome>) -> GenerationOutcome {
    let mut merged = GenerationOutcome::default();
    let mut seen = std::collections::HashSet::new();
    for outcome in outcomes {
        for sample in outcome.samples {
            if seen.insert(sample.id.clone()) {
                merged.samples.push(sample);
            }
        }
        merged.ledger.extend(outcome.ledger);
    }
    merged
}
