//! Scoring detection runs: per-cell Macro-F1 over the strata grid,
//! distribution-shift deltas, and byte-deterministic report emitters.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ContentType, Era, Origin, SampleIndex, Severity, Split, SplitAssignment, Veracity};
use crate::detect::{DetectionResult, Prediction};
use crate::prompt::Strategy;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions ({preds}) and golds ({golds}) differ in length")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("result references sample {0}, which is not in the corpus")]
    MissingSample(String),
    #[error("sample {0} has no split assignment")]
    MissingSplit(String),
}

/// Precision, recall, and F1 for one class. Every zero denominator
/// contributes zero, so degenerate slices score 0 rather than poisoning
/// aggregates with NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn matches_class(pred: Prediction, class: Veracity) -> bool {
    matches!(
        (pred, class),
        (Prediction::Real, Veracity::Real) | (Prediction::Fake, Veracity::Fake)
    )
}

/// Confusion-matrix scores for one class. `unknown` predictions never
/// count as a positive call, so they surface as misses (false negatives)
/// on the gold class.
pub fn class_scores(preds: &[Prediction], golds: &[Veracity], class: Veracity) -> ClassScores {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&pred, &gold) in preds.iter().zip(golds) {
        let predicted_class = matches_class(pred, class);
        let gold_class = gold == class;
        match (predicted_class, gold_class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, denom: usize| if denom == 0 { 0.0 } else { num as f64 / denom as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassScores { precision, recall, f1 }
}

/// Unweighted mean of the real-class and fake-class F1.
pub fn macro_f1(preds: &[Prediction], golds: &[Veracity]) -> Result<f64, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    let real = class_scores(preds, golds, Veracity::Real).f1;
    let fake = class_scores(preds, golds, Veracity::Fake).f1;
    Ok((real + fake) / 2.0)
}

// ---------------------------------------------------------------------------
// Report structure
// ---------------------------------------------------------------------------

/// Identity of one report cell: who detected, with which strategy, over
/// which stratum of the evaluation data.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub provider_id: String,
    pub strategy: Strategy,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<Severity>,
    pub content_type: ContentType,
    pub era: Era,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    #[serde(flatten)]
    pub key: CellKey,
    pub macro_f1: f64,
    pub support: usize,
    pub unknown: usize,
}

impl ReportCell {
    pub fn unknown_rate(&self) -> f64 {
        if self.support == 0 {
            0.0
        } else {
            self.unknown as f64 / self.support as f64
        }
    }
}

/// Macro-F1 shift from the in-distribution test cell to the matching
/// out-of-distribution cell (`ood_full` minus `test`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub provider_id: String,
    pub strategy: Strategy,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<Severity>,
    pub content_type: ContentType,
    pub id_macro_f1: f64,
    pub ood_macro_f1: f64,
    pub delta: f64,
}

/// Unweighted mean of a strategy's cell scores for one provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyMean {
    pub provider_id: String,
    pub strategy: Strategy,
    pub mean_macro_f1: f64,
    pub cells: usize,
}

/// Whether the detector judged its own generations or another model's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenRelation {
    SelfGenerated,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfExternalRow {
    pub provider_id: String,
    pub strategy: Strategy,
    pub relation: GenRelation,
    pub macro_f1: f64,
    pub support: usize,
}

/// The full evaluation report. Rows are sorted by key, so serializing the
/// same data always yields the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scored: usize,
    /// Results whose samples sit in train/validation; recorded, not scored.
    pub skipped: usize,
    pub cells: Vec<ReportCell>,
    pub deltas: Vec<DeltaRow>,
    pub strategy_means: Vec<StrategyMean>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub self_external: Vec<SelfExternalRow>,
}

/// Aggregate detection results into the stratified report.
///
/// Only results whose samples sit in the `test` or `ood_full` split are
/// scored; the rest are counted as skipped. A result referencing a sample
/// missing from the corpus or the split table is an error, not a skip —
/// that is data loss, not design. `lineage` (generated sample id to
/// generating provider id) enables the self-vs-external comparison.
pub fn build_report(
    results: &[DetectionResult],
    index: &SampleIndex,
    splits: &[SplitAssignment],
    lineage: Option<&HashMap<String, String>>,
) -> Result<EvaluationReport, EvalError> {
    let split_of: HashMap<&str, Split> = splits
        .iter()
        .map(|a| (a.sample_id.as_str(), a.split))
        .collect();

    let mut groups: BTreeMap<CellKey, Vec<(Prediction, Veracity)>> = BTreeMap::new();
    let mut relation_groups: BTreeMap<(String, Strategy, GenRelation), Vec<(Prediction, Veracity)>> =
        BTreeMap::new();
    let mut skipped = 0usize;
    let mut scored = 0usize;

    for result in results {
        let sample = index
            .get(&result.sample_id)
            .ok_or_else(|| EvalError::MissingSample(result.sample_id.clone()))?;
        let split = split_of
            .get(result.sample_id.as_str())
            .ok_or_else(|| EvalError::MissingSplit(result.sample_id.clone()))?;
        if !matches!(split, Split::Test | Split::OodFull) {
            skipped += 1;
            continue;
        }
        scored += 1;
        let key = CellKey {
            provider_id: result.provider_id.clone(),
            strategy: result.strategy,
            origin: sample.origin,
            severity: sample.severity,
            content_type: sample.content_type,
            era: sample.era,
        };
        groups
            .entry(key)
            .or_default()
            .push((result.predicted, sample.veracity));

        if let (Some(lineage), Origin::Llm) = (lineage, sample.origin) {
            if let Some(generator) = lineage.get(&sample.id) {
                let relation = if generator == &result.provider_id {
                    GenRelation::SelfGenerated
                } else {
                    GenRelation::External
                };
                relation_groups
                    .entry((result.provider_id.clone(), result.strategy, relation))
                    .or_default()
                    .push((result.predicted, sample.veracity));
            }
        }
    }

    let score_group = |pairs: &[(Prediction, Veracity)]| {
        let preds: Vec<Prediction> = pairs.iter().map(|(p, _)| *p).collect();
        let golds: Vec<Veracity> = pairs.iter().map(|(_, g)| *g).collect();
        let unknown = preds.iter().filter(|p| **p == Prediction::Unknown).count();
        // Lengths match by construction.
        (macro_f1(&preds, &golds).unwrap(), pairs.len(), unknown)
    };

    let cells: Vec<ReportCell> = groups
        .iter()
        .map(|(key, pairs)| {
            let (macro_f1, support, unknown) = score_group(pairs);
            ReportCell {
                key: key.clone(),
                macro_f1,
                support,
                unknown,
            }
        })
        .collect();

    // Pair test-era cells with ood-era cells that agree on every other axis.
    type DeltaKey = (String, Strategy, Origin, Option<Severity>, ContentType);
    let mut by_axis: BTreeMap<DeltaKey, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for cell in &cells {
        let axis = (
            cell.key.provider_id.clone(),
            cell.key.strategy,
            cell.key.origin,
            cell.key.severity,
            cell.key.content_type,
        );
        let entry = by_axis.entry(axis).or_default();
        match cell.key.era {
            Era::PreCutoff => entry.0 = Some(cell.macro_f1),
            Era::PostCutoff => entry.1 = Some(cell.macro_f1),
        }
    }
    let deltas: Vec<DeltaRow> = by_axis
        .into_iter()
        .filter_map(|(axis, pair)| match pair {
            (Some(id_score), Some(ood_score)) => Some(DeltaRow {
                provider_id: axis.0,
                strategy: axis.1,
                origin: axis.2,
                severity: axis.3,
                content_type: axis.4,
                id_macro_f1: id_score,
                ood_macro_f1: ood_score,
                delta: ood_score - id_score,
            }),
            _ => None,
        })
        .collect();

    let mut mean_groups: BTreeMap<(String, Strategy), Vec<f64>> = BTreeMap::new();
    for cell in &cells {
        mean_groups
            .entry((cell.key.provider_id.clone(), cell.key.strategy))
            .or_default()
            .push(cell.macro_f1);
    }
    let strategy_means: Vec<StrategyMean> = mean_groups
        .into_iter()
        .map(|((provider_id, strategy), scores)| StrategyMean {
            provider_id,
            strategy,
            mean_macro_f1: scores.iter().sum::<f64>() / scores.len() as f64,
            cells: scores.len(),
        })
        .collect();

    let self_external: Vec<SelfExternalRow> = relation_groups
        .iter()
        .map(|((provider_id, strategy, relation), pairs)| {
            let (macro_f1, support, _) = score_group(pairs);
            SelfExternalRow {
                provider_id: provider_id.clone(),
                strategy: *strategy,
                relation: *relation,
                macro_f1,
                support,
            }
        })
        .collect();

    Ok(EvaluationReport {
        scored,
        skipped,
        cells,
        deltas,
        strategy_means,
        self_external,
    })
}

// ---------------------------------------------------------------------------
// Emitters
// ---------------------------------------------------------------------------

/// Output formats for [`emit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitFormat {
    Csv,
    Markdown,
    Plotdata,
}

impl EmitFormat {
    pub fn from_token(token: &str) -> Option<EmitFormat> {
        match token.to_ascii_lowercase().as_str() {
            "csv" => Some(EmitFormat::Csv),
            "markdown" | "md" => Some(EmitFormat::Markdown),
            "plotdata" => Some(EmitFormat::Plotdata),
            _ => None,
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            EmitFormat::Csv => "csv",
            EmitFormat::Markdown => "md",
            EmitFormat::Plotdata => "jsonl",
        }
    }
}

fn fmt_score(value: f64) -> String {
    format!("{value:.6}")
}

fn fmt_severity(severity: Option<Severity>) -> String {
    severity.map(|s| s.to_string()).unwrap_or_default()
}

fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

/// Render the report in the requested format. Rows follow the report's
/// sorted order and floats use fixed six-decimal formatting, so equal
/// reports emit byte-identical output.
pub fn emit(report: &EvaluationReport, format: EmitFormat) -> String {
    match format {
        EmitFormat::Csv => emit_csv(report),
        EmitFormat::Markdown => emit_markdown(report),
        EmitFormat::Plotdata => emit_plotdata(report),
    }
}

fn emit_csv(report: &EvaluationReport) -> String {
    let mut out = String::from(
        "provider_id,strategy,origin,severity,content_type,era,macro_f1,support,unknown_rate\n",
    );
    for cell in &report.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            csv_field(&cell.key.provider_id),
            cell.key.strategy,
            cell.key.origin,
            fmt_severity(cell.key.severity),
            cell.key.content_type,
            cell.key.era,
            fmt_score(cell.macro_f1),
            cell.support,
            fmt_score(cell.unknown_rate()),
        ));
    }
    out
}

fn emit_markdown(report: &EvaluationReport) -> String {
    let mut out = String::new();
    out.push_str("# Detection report\n\n");
    out.push_str(&format!(
        "Scored {} result(s); skipped {} from non-evaluation splits.\n\n",
        report.scored, report.skipped
    ));

    out.push_str("## Strategy means (unweighted over cells)\n\n");
    out.push_str("| provider | strategy | mean Macro-F1 | cells |\n");
    out.push_str("| --- | --- | --- | --- |\n");
    for mean in &report.strategy_means {
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            mean.provider_id,
            mean.strategy,
            fmt_score(mean.mean_macro_f1),
            mean.cells
        ));
    }

    out.push_str("\n## Cells\n\n");
    out.push_str(
        "| provider | strategy | origin | severity | content type | era | Macro-F1 | support | unknown rate |\n",
    );
    out.push_str("| --- | --- | --- | --- | --- | --- | --- | --- | --- |\n");
    for cell in &report.cells {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            cell.key.provider_id,
            cell.key.strategy,
            cell.key.origin,
            fmt_severity(cell.key.severity),
            cell.key.content_type,
            cell.key.era,
            fmt_score(cell.macro_f1),
            cell.support,
            fmt_score(cell.unknown_rate()),
        ));
    }

    out.push_str("\n## Era shift (ood_full minus test)\n\n");
    out.push_str("| provider | strategy | origin | severity | content type | test | ood_full | delta |\n");
    out.push_str("| --- | --- | --- | --- | --- | --- | --- | --- |\n");
    for row in &report.deltas {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
            row.provider_id,
            row.strategy,
            row.origin,
            fmt_severity(row.severity),
            row.content_type,
            fmt_score(row.id_macro_f1),
            fmt_score(row.ood_macro_f1),
            fmt_score(row.delta),
        ));
    }

    if !report.self_external.is_empty() {
        out.push_str("\n## Own generations vs other models'\n\n");
        out.push_str("| provider | strategy | relation | Macro-F1 | support |\n");
        out.push_str("| --- | --- | --- | --- | --- |\n");
        for row in &report.self_external {
            let relation = match row.relation {
                GenRelation::SelfGenerated => "self_generated",
                GenRelation::External => "external",
            };
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                row.provider_id,
                row.strategy,
                relation,
                fmt_score(row.macro_f1),
                row.support
            ));
        }
    }
    out
}

fn emit_plotdata(report: &EvaluationReport) -> String {
    let mut lines: Vec<String> = Vec::new();
    for cell in &report.cells {
        lines.push(
            serde_json::json!({
                "front": "grid",
                "provider_id": cell.key.provider_id,
                "strategy": cell.key.strategy,
                "origin": cell.key.origin,
                "severity": cell.key.severity,
                "content_type": cell.key.content_type,
                "era": cell.key.era,
                "macro_f1": cell.macro_f1,
                "support": cell.support,
                "unknown_rate": cell.unknown_rate(),
            })
            .to_string(),
        );
    }
    for row in &report.deltas {
        lines.push(
            serde_json::json!({
                "front": "era_shift",
                "provider_id": row.provider_id,
                "strategy": row.strategy,
                "origin": row.origin,
                "severity": row.severity,
                "content_type": row.content_type,
                "id_macro_f1": row.id_macro_f1,
                "ood_macro_f1": row.ood_macro_f1,
                "delta": row.delta,
            })
            .to_string(),
        );
    }
    for mean in &report.strategy_means {
        lines.push(
            serde_json::json!({
                "front": "strategy_mean",
                "provider_id": mean.provider_id,
                "strategy": mean.strategy,
                "mean_macro_f1": mean.mean_macro_f1,
                "cells": mean.cells,
            })
            .to_string(),
        );
    }
    for row in &report.self_external {
        lines.push(
            serde_json::json!({
                "front": "generator_relation",
                "provider_id": row.provider_id,
                "strategy": row.strategy,
                "relation": row.relation,
                "macro_f1": row.macro_f1,
                "support": row.support,
            })
            .to_string(),
        );
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}
