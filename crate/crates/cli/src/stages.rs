//! Stage runners: each reads its inputs from the run directory, writes its
//! artifacts there, and reports what it wrote for the run manifest.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use f3_core::corpus::{
    self, validate_lineage, NewsSample, Origin, SampleIndex, Split, SplitAssignment, Veracity,
};
use f3_core::detect::DetectionResult;
use f3_core::evaluate::{build_report, emit, EmitFormat};
use f3_core::hashing;
use f3_core::jsonl;
use f3_core::prompt::{Catalog, Strategy, VariantId};
use f3_core::purify::PairScorer;
use f3_gateway::{
    ApiShape, Gateway, GatewayStats, HttpTransport, MockScript, MockTransport, ProviderConfig,
    RoutingTransport, Store,
};
use f3_pipeline::scorers::{CachedScorer, CommandScorer, FixtureScorer, HttpScorer, ReplayScorer};
use f3_pipeline::{
    merge_outcomes, run_matrix, run_purify, sweep_variants, GenerationEntry, JobStatus,
    PurifyOutcome, ThresholdChoice,
};

use crate::config::{AlignBackend, LoadedConfig, RunConfig, RunMode};

pub const HUMAN: &str = "human.jsonl";
pub const INGEST_DIAGNOSTICS: &str = "ingest_diagnostics.jsonl";
pub const CLEAN: &str = "clean.jsonl";
pub const CLEAN_REMOVED: &str = "clean_removed.jsonl";
pub const GENERATED: &str = "generated.jsonl";
pub const GENERATION_LEDGER: &str = "generation_ledger.jsonl";
pub const PURIFIED: &str = "purified.jsonl";
pub const PURIFY_LEDGER: &str = "purify_ledger.jsonl";
pub const PURIFY_SUMMARY: &str = "purify_summary.json";
pub const THRESHOLDS: &str = "thresholds.json";
pub const SPLITS: &str = "splits.jsonl";
pub const DETECTIONS: &str = "detections.jsonl";
pub const DETECTION_LEDGER: &str = "detection_ledger.jsonl";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_MD: &str = "report.md";
pub const PLOTDATA: &str = "plotdata.jsonl";
pub const MANIFEST: &str = "manifest.json";

/// Everything the stage runners share for one invocation.
pub struct RunContext<'a> {
    pub loaded: &'a LoadedConfig,
    pub mode: RunMode,
    pub out: PathBuf,
    pub cache: PathBuf,
    pub catalog: Catalog,
}

impl RunContext<'_> {
    pub fn config(&self) -> &RunConfig {
        &self.loaded.config
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// What one stage wrote and wants surfaced.
#[derive(Debug, Default)]
pub struct StageOutput {
    pub artifacts: Vec<&'static str>,
    pub warnings: Vec<String>,
}

impl StageOutput {
    fn wrote(artifacts: Vec<&'static str>) -> StageOutput {
        StageOutput { artifacts, warnings: Vec::new() }
    }
}

/// The per-run record that makes a run replayable: what was asked for
/// (config digest, prompt checksums), what came out (artifact digests), and
/// how the model-call cache behaved.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_digest: String,
    pub catalog_version: u32,
    pub prompt_checksums: BTreeMap<String, String>,
    /// Artifact file name -> sha256 of its bytes, for this run's outputs.
    pub artifacts: BTreeMap<String, String>,
    pub cache: GatewayStats,
    pub warnings: Vec<String>,
}

pub fn write_manifest(
    ctx: &RunContext<'_>,
    command: &str,
    outputs: &[StageOutput],
    cache: GatewayStats,
) -> Result<()> {
    let mut artifacts = BTreeMap::new();
    let mut warnings = Vec::new();
    for output in outputs {
        for name in &output.artifacts {
            let path = ctx.artifact(name);
            let bytes = std::fs::read(&path)
                .with_context(|| format!("digesting artifact {}", path.display()))?;
            artifacts.insert(name.to_string(), hashing::sha256_hex(&bytes));
        }
        warnings.extend(output.warnings.iter().cloned());
    }
    let manifest = Manifest {
        command: command.to_string(),
        config_digest: ctx.config().semantic_digest(),
        catalog_version: ctx.catalog.version(),
        prompt_checksums: ctx.catalog.checksums().clone(),
        artifacts,
        cache,
        warnings,
    };
    write_json(&ctx.artifact(MANIFEST), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_jsonl<T: Serialize>(ctx: &RunContext<'_>, name: &str, items: &[T]) -> Result<()> {
    jsonl::write(&ctx.artifact(name), items)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Read a prior stage's JSON-lines artifact, naming the missing file and
/// the stage that produces it when it is not there yet.
fn read_stage_file<T: DeserializeOwned>(path: &Path, producer: &str) -> Result<Vec<T>> {
    if !path.exists() {
        bail!(
            "missing artifact {} (run `f3 {producer}` first)",
            path.display()
        );
    }
    Ok(jsonl::read(path)?)
}

/// The corpus later stages run on: cleaned human samples, plus the purified
/// generated samples whenever the run generates any.
fn combined_corpus(ctx: &RunContext<'_>) -> Result<Vec<NewsSample>> {
    let mut samples: Vec<NewsSample> = read_stage_file(&ctx.artifact(CLEAN), "clean")?;
    if !ctx.config().roles.generators.is_empty() {
        let purified: Vec<NewsSample> = read_stage_file(&ctx.artifact(PURIFIED), "purify")?;
        samples.extend(purified);
    }
    Ok(samples)
}

/// Build the gateway all model traffic goes through: a shared cache, plus a
/// transport routing each mock provider to its script and everything else
/// over HTTP. Replay mode never constructs a transport at all.
pub fn build_gateway(ctx: &RunContext<'_>) -> Result<Gateway> {
    let store = Store::open(&ctx.cache)?;
    if ctx.mode == RunMode::Replay {
        return Ok(Gateway::replay(store));
    }

    let mut routing = RoutingTransport::new();
    let mut needs_http = false;
    for provider in &ctx.config().providers {
        match provider.api {
            ApiShape::Mock => {
                let path = ctx
                    .config()
                    .mock_scripts
                    .get(&provider.provider_id)
                    .map(|p| ctx.loaded.resolve(p))
                    .expect("validated: every live mock provider has a script");
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading mock script {}", path.display()))?;
                let script: MockScript = serde_json::from_str(&text)
                    .with_context(|| format!("parsing mock script {}", path.display()))?;
                routing = routing.route(&provider.provider_id, Box::new(MockTransport::new(script)));
            }
            ApiShape::OpenaiChat | ApiShape::PalmText => needs_http = true,
        }
    }
    if needs_http {
        routing = routing.fallback(Box::new(HttpTransport::new()?));
    }

    let mut gateway = Gateway::live(store, Box::new(routing));
    for phrase in &ctx.config().refusal_phrases {
        gateway.add_refusal_phrase(phrase);
    }
    Ok(gateway)
}

/// Build the factual-alignment scorer. Live backends are wrapped in the
/// score cache; replay reads that cache and nothing else.
pub fn build_scorer(ctx: &RunContext<'_>) -> Result<Box<dyn PairScorer>> {
    let Some(align) = &ctx.config().align else {
        bail!("config has no align backend, required to purify");
    };
    let store = Store::open(&ctx.cache)?;
    if ctx.mode == RunMode::Replay {
        return Ok(Box::new(ReplayScorer::new(align.scorer_name(), store)));
    }
    let inner: Box<dyn PairScorer> = match align {
        AlignBackend::Fixture { path } => {
            Box::new(FixtureScorer::from_file(&ctx.loaded.resolve(path))?)
        }
        AlignBackend::Command { program, args } => {
            Box::new(CommandScorer::new(program.clone(), args.clone()))
        }
        AlignBackend::Http { endpoint } => Box::new(HttpScorer::new(endpoint.clone())?),
    };
    Ok(Box::new(CachedScorer::new(inner, store)))
}

pub fn run_ingest(ctx: &RunContext<'_>) -> Result<StageOutput> {
    let path = ctx.loaded.corpus_path();
    let outcome = corpus::ingest(&path, &ctx.config().corpus.schema_tag)?;
    validate_lineage(&outcome.samples)?;
    write_jsonl(ctx, HUMAN, &outcome.samples)?;
    write_jsonl(ctx, INGEST_DIAGNOSTICS, &outcome.diagnostics)?;
    println!(
        "ingest: accepted {} samples, rejected {} rows",
        outcome.samples.len(),
        outcome.diagnostics.len()
    );
    Ok(StageOutput::wrote(vec![HUMAN, INGEST_DIAGNOSTICS]))
}

pub fn run_clean(ctx: &RunContext<'_>) -> Result<StageOutput> {
    let samples: Vec<NewsSample> = read_stage_file(&ctx.artifact(HUMAN), "ingest")?;
    let total = samples.len();
    let outcome = corpus::clean(samples, &ctx.config().clean);
    write_jsonl(ctx, CLEAN, &outcome.kept)?;
    write_jsonl(ctx, CLEAN_REMOVED, &outcome.removed)?;
    println!(
        "clean: kept {} of {total}, removed {}",
        outcome.kept.len(),
        outcome.removed.len()
    );
    Ok(StageOutput::wrote(vec![CLEAN, CLEAN_REMOVED]))
}

pub fn run_generate(
    ctx: &RunContext<'_>,
    gateway: &mut Gateway,
    sources_override: Option<&Path>,
    generators: &[ProviderConfig],
    variants: &[VariantId],
) -> Result<StageOutput> {
    let pool: Vec<NewsSample> = match sources_override {
        Some(path) => read_stage_file(path, "clean")?,
        None => read_stage_file(&ctx.artifact(CLEAN), "clean")?,
    };
    let sources: Vec<NewsSample> = pool
        .into_iter()
        .filter(|s| s.origin == Origin::Human && s.veracity == Veracity::Real)
        .collect();
    if sources.is_empty() {
        bail!("no verified real human-written sources to rewrite");
    }

    let mut outcomes = Vec::with_capacity(generators.len());
    for provider in generators {
        outcomes.push(sweep_variants(gateway, &ctx.catalog, provider, &sources, variants)?);
    }
    let merged = merge_outcomes(outcomes);

    let refused = merged.ledger.iter().filter(|e| e.status == JobStatus::Refused).count();
    let errored = merged.ledger.iter().filter(|e| e.status == JobStatus::Error).count();
    write_jsonl(ctx, GENERATED, &merged.samples)?;
    write_jsonl(ctx, GENERATION_LEDGER, &merged.ledger)?;
    println!(
        "generate: {} jobs -> {} samples ({refused} refused, {errored} errored)",
        merged.ledger.len(),
        merged.samples.len()
    );
    Ok(StageOutput::wrote(vec![GENERATED, GENERATION_LEDGER]))
}

pub fn run_purify_stage(
    ctx: &RunContext<'_>,
    gateway: &mut Gateway,
    scorer: &dyn PairScorer,
    input_override: Option<&Path>,
    judges: &[ProviderConfig],
    choice: ThresholdChoice,
) -> Result<StageOutput> {
    let samples: Vec<NewsSample> = match input_override {
        Some(path) => read_stage_file(path, "generate")?,
        None => read_stage_file(&ctx.artifact(GENERATED), "generate")?,
    };
    let parents: Vec<NewsSample> = read_stage_file(&ctx.artifact(CLEAN), "clean")?;
    let parent_index = SampleIndex::build(&parents)?;
    let embedder = ctx
        .config()
        .roles
        .embedder
        .as_deref()
        .map(|id| ctx.config().provider(id).expect("validated: embedder exists").clone());

    let outcome: PurifyOutcome = run_purify(
        gateway,
        judges,
        scorer,
        embedder.as_ref(),
        &samples,
        &parent_index,
        choice,
    )?;

    write_jsonl(ctx, PURIFIED, &outcome.kept)?;
    write_jsonl(ctx, PURIFY_LEDGER, &outcome.verdicts)?;
    write_json(&ctx.artifact(PURIFY_SUMMARY), &outcome.summary)?;
    write_json(&ctx.artifact(THRESHOLDS), &outcome.thresholds)?;
    let s = &outcome.summary;
    println!(
        "purify: kept {} of {} ({} logical, {} unresolved, {} factual)",
        s.kept,
        s.input,
        s.removed_logical_misalignment,
        s.removed_vote_unresolved,
        s.removed_factual_misalignment
    );
    Ok(StageOutput::wrote(vec![PURIFIED, PURIFY_LEDGER, PURIFY_SUMMARY, THRESHOLDS]))
}

pub fn run_split(ctx: &RunContext<'_>) -> Result<StageOutput> {
    let samples = combined_corpus(ctx)?;
    let outcome = corpus::split_corpus(&samples, &ctx.config().split, ctx.config().seed)?;
    write_jsonl(ctx, SPLITS, &outcome.assignments)?;
    let count_of = |split: Split| outcome.assignments.iter().filter(|a| a.split == split).count();
    println!(
        "split: {} train, {} validation, {} test, {} ood_full ({} warnings)",
        count_of(Split::Train),
        count_of(Split::Validation),
        count_of(Split::Test),
        count_of(Split::OodFull),
        outcome.warnings.len()
    );
    Ok(StageOutput {
        artifacts: vec![SPLITS],
        warnings: outcome.warnings,
    })
}

pub fn run_detect(
    ctx: &RunContext<'_>,
    gateway: &mut Gateway,
    input_override: Option<&Path>,
    detectors: &[ProviderConfig],
    strategies: &[Strategy],
) -> Result<StageOutput> {
    let samples: Vec<NewsSample> = match input_override {
        // An explicit input file is benchmarked whole, splits ignored.
        Some(path) => read_stage_file(path, "generate")?,
        None => {
            let assignments: Vec<SplitAssignment> =
                read_stage_file(&ctx.artifact(SPLITS), "split")?;
            let corpus = combined_corpus(ctx)?;
            let by_id: HashMap<&str, &NewsSample> =
                corpus.iter().map(|s| (s.id.as_str(), s)).collect();
            let mut picked = Vec::new();
            for assignment in &assignments {
                if matches!(assignment.split, Split::Test | Split::OodFull) {
                    match by_id.get(assignment.sample_id.as_str()) {
                        Some(sample) => picked.push((*sample).clone()),
                        None => bail!(
                            "split assignment references unknown sample {}",
                            assignment.sample_id
                        ),
                    }
                }
            }
            picked
        }
    };
    if samples.is_empty() {
        bail!("no samples to detect: test and ood_full splits are empty");
    }

    let outcome = run_matrix(
        gateway,
        &ctx.catalog,
        detectors,
        strategies,
        &samples,
        ctx.config().label_rule,
    )?;
    write_jsonl(ctx, DETECTIONS, &outcome.results)?;
    write_jsonl(ctx, DETECTION_LEDGER, &outcome.ledger)?;
    println!(
        "detect: {} providers x {} strategies x {} samples -> {} results",
        detectors.len(),
        strategies.len(),
        samples.len(),
        outcome.results.len()
    );
    Ok(StageOutput::wrote(vec![DETECTIONS, DETECTION_LEDGER]))
}

/// Rebuild the sample -> generating-provider map from the generation
/// ledger; first writer wins, matching how duplicate ids are merged.
fn lineage_from_ledger(entries: &[GenerationEntry]) -> HashMap<String, String> {
    let mut lineage = HashMap::new();
    for entry in entries {
        if let Some(sample_id) = &entry.sample_id {
            lineage
                .entry(sample_id.clone())
                .or_insert_with(|| entry.provider_id.clone());
        }
    }
    lineage
}

pub fn run_evaluate(
    ctx: &RunContext<'_>,
    results_override: Option<&Path>,
    splits_override: Option<&Path>,
    formats: &[EmitFormat],
) -> Result<StageOutput> {
    let results: Vec<DetectionResult> = match results_override {
        Some(path) => read_stage_file(path, "detect")?,
        None => read_stage_file(&ctx.artifact(DETECTIONS), "detect")?,
    };
    let assignments: Vec<SplitAssignment> = match splits_override {
        Some(path) => read_stage_file(path, "split")?,
        None => read_stage_file(&ctx.artifact(SPLITS), "split")?,
    };
    let corpus = combined_corpus(ctx)?;
    let index = SampleIndex::build(&corpus)?;

    let ledger_path = ctx.artifact(GENERATION_LEDGER);
    let lineage = if ledger_path.exists() {
        let entries: Vec<GenerationEntry> = jsonl::read(&ledger_path)?;
        Some(lineage_from_ledger(&entries))
    } else {
        None
    };

    let report = build_report(&results, &index, &assignments, lineage.as_ref())?;

    let mut artifacts = Vec::with_capacity(formats.len());
    for format in formats {
        let name = match format {
            EmitFormat::Csv => REPORT_CSV,
            EmitFormat::Markdown => REPORT_MD,
            EmitFormat::Plotdata => PLOTDATA,
        };
        write_text(&ctx.artifact(name), &emit(&report, *format))?;
        artifacts.push(name);
    }
    println!(
        "evaluate: scored {} results ({} skipped), {} cells -> {}",
        report.scored,
        report.skipped,
        report.cells.len(),
        artifacts.join(" ")
    );
    Ok(StageOutput::wrote(artifacts))
}
