//! The purification stage: entailment vote, factual thresholds, then
//! report-only semantic diagnostics, with a verdict ledger covering every
//! input sample.

use f3_core::corpus::{NewsSample, SampleIndex, Veracity};
use f3_core::purify::{
    compute_hybrid_thresholds, cosine_similarity, factual_filter, logical_filter, nli_decision,
    semantic_distance, ConsistencyScores, FilterDecision, PurifySummary, PurifyVerdict,
    PairScorer, ThresholdConfig,
};
use f3_gateway::{Gateway, GatewayError, ProviderConfig};
use serde::{Deserialize, Serialize};

use crate::judge::judge_pair;
use crate::scorers::score_pairs;
use crate::PipelineError;

/// Where the factual thresholds come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdChoice {
    /// Use the published default pair (0.36, 0.61).
    PaperDefault,
    /// Score every input first and derive the hybrid thresholds from this
    /// batch's fake/real score distributions.
    ComputeFromBatch,
}

/// Everything the purification stage produces. `kept` and `verdicts` are
/// sorted by sample id so the stage is byte-deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurifyOutcome {
    pub kept: Vec<NewsSample>,
    pub verdicts: Vec<PurifyVerdict>,
    pub summary: PurifySummary,
    pub thresholds: ThresholdConfig,
}

/// Run the full filter over generated samples.
///
/// Stage order is fixed: the entailment vote removes label-inconsistent
/// samples first, the factual thresholds judge the survivors, and the
/// semantic diagnostics annotate what remains without removing anything.
/// A diagnostic failure becomes a note on the verdict; a scorer failure
/// aborts the stage, because the factual filter cannot proceed without its
/// evidence.
pub fn run_purify(
    gateway: &mut Gateway,
    judges: &[ProviderConfig],
    scorer: &dyn PairScorer,
    embed_provider: Option<&ProviderConfig>,
    samples: &[NewsSample],
    parents: &SampleIndex,
    choice: ThresholdChoice,
) -> Result<PurifyOutcome, PipelineError> {
    // Broken lineage is a data bug; fail before spending model calls.
    let parent_texts: Vec<String> = samples
        .iter()
        .map(|sample| parents.parent_text(sample).map(str::to_string))
        .collect::<Result<_, _>>()?;

    let mut align_scores: Vec<Option<f64>> = vec![None; samples.len()];
    let thresholds = match choice {
        ThresholdChoice::PaperDefault => ThresholdConfig::defaults(),
        ThresholdChoice::ComputeFromBatch => {
            let pairs: Vec<(String, String)> = samples
                .iter()
                .zip(&parent_texts)
                .map(|(sample, parent)| (parent.clone(), sample.text.clone()))
                .collect();
            for (slot, result) in align_scores.iter_mut().zip(score_pairs(scorer, &pairs)) {
                *slot = Some(result?);
            }
            let list_for = |veracity: Veracity| -> Vec<f64> {
                samples
                    .iter()
                    .zip(&align_scores)
                    .filter(|(sample, _)| sample.veracity == veracity)
                    .map(|(_, score)| score.expect("scored above"))
                    .collect()
            };
            compute_hybrid_thresholds(&list_for(Veracity::Fake), &list_for(Veracity::Real))?
        }
    };

    // Stage 1: the entailment jury.
    let mut decisions: Vec<FilterDecision> = Vec::with_capacity(samples.len());
    let mut votes_per_sample = Vec::with_capacity(samples.len());
    for (sample, parent) in samples.iter().zip(&parent_texts) {
        let votes = judge_pair(gateway, judges, parent, &sample.text)?;
        let decision = nli_decision(&votes.iter().map(|v| v.vote).collect::<Vec<_>>());
        decisions.push(logical_filter(sample.veracity, decision));
        votes_per_sample.push(votes);
    }

    // Stage 2: factual thresholds for the logical survivors. With the
    // published defaults only the survivors need scoring.
    let survivor_indices: Vec<usize> = decisions
        .iter()
        .enumerate()
        .filter(|(_, d)| matches!(d, FilterDecision::Keep))
        .map(|(i, _)| i)
        .collect();
    if choice == ThresholdChoice::PaperDefault {
        let pairs: Vec<(String, String)> = survivor_indices
            .iter()
            .map(|&i| (parent_texts[i].clone(), samples[i].text.clone()))
            .collect();
        for (&i, result) in survivor_indices.iter().zip(score_pairs(scorer, &pairs)) {
            align_scores[i] = Some(result?);
        }
    }
    for &i in &survivor_indices {
        let score = align_scores[i].expect("survivors are scored");
        decisions[i] = factual_filter(samples[i].veracity, score, &thresholds)?;
    }

    // Stage 3: report-only semantic diagnostics on what remains.
    let mut contextual: Vec<Option<f64>> = vec![None; samples.len()];
    let mut distances: Vec<Option<f64>> = vec![None; samples.len()];
    let mut notes: Vec<Vec<String>> = vec![Vec::new(); samples.len()];
    if let Some(provider) = embed_provider {
        for (i, decision) in decisions.iter().enumerate() {
            if !matches!(decision, FilterDecision::Keep) {
                continue;
            }
            match embed_pair(gateway, provider, &parent_texts[i], &samples[i].text) {
                Ok((source_vec, generated_vec)) => {
                    match cosine_similarity(&source_vec, &generated_vec) {
                        Ok(similarity) => contextual[i] = Some(similarity),
                        Err(err) => notes[i].push(format!("contextual score failed: {err}")),
                    }
                    match semantic_distance(&source_vec, &generated_vec) {
                        Ok(distance) => distances[i] = Some(distance),
                        Err(err) => notes[i].push(format!("semantic distance failed: {err}")),
                    }
                }
                Err(PipelineError::Gateway(GatewayError::Auth(var))) => {
                    return Err(PipelineError::Gateway(GatewayError::Auth(var)));
                }
                Err(err) => notes[i].push(format!("semantic diagnostics failed: {err}")),
            }
        }
    }

    // Assemble the ledger, sorted by sample id.
    let mut verdicts: Vec<PurifyVerdict> = Vec::with_capacity(samples.len());
    let mut kept: Vec<NewsSample> = Vec::new();
    for (i, sample) in samples.iter().enumerate() {
        let scores = ConsistencyScores {
            nli_votes: votes_per_sample[i].clone(),
            align_score: align_scores[i],
            contextual_score: contextual[i],
            semantic_distance: distances[i],
            notes: std::mem::take(&mut notes[i]),
        };
        match decisions[i] {
            FilterDecision::Keep => {
                kept.push(sample.clone());
                verdicts.push(PurifyVerdict::keep(sample.id.clone(), scores));
            }
            FilterDecision::Remove(reason) => {
                verdicts.push(PurifyVerdict::remove(sample.id.clone(), reason, scores));
            }
        }
    }
    verdicts.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    kept.sort_by(|a, b| a.id.cmp(&b.id));

    let summary = PurifySummary::from_verdicts(&verdicts);
    debug_assert!(summary.conserved());
    Ok(PurifyOutcome { kept, verdicts, summary, thresholds })
}

fn embed_pair(
    gateway: &mut Gateway,
    provider: &ProviderConfig,
    source: &str,
    generated: &str,
) -> Result<(Vec<f64>, Vec<f64>), PipelineError> {
    let source_vec = gateway.embed(provider, source)?.embedding;
    let generated_vec = gateway.embed(provider, generated)?.embedding;
    Ok((source_vec, generated_vec))
}
