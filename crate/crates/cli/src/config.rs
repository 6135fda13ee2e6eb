//! Run configuration: one JSON file naming the corpus, the providers and
//! their roles, and every stage parameter.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use f3_core::corpus::{CleanConfig, Severity, SplitRatios};
use f3_core::detect::LabelRule;
use f3_core::evaluate::EmitFormat;
use f3_core::hashing;
use f3_core::prompt::{generation_variants, GenerationKind, Strategy, VariantId};
use f3_gateway::{validate_providers, ApiShape, ProviderConfig};
use f3_pipeline::ThresholdChoice;

/// Whether model calls may go out or must come from the cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Dispatch cache misses to the configured backends.
    #[default]
    Live,
    /// Serve everything from the cache; any miss is an error.
    Replay,
}

/// Where the source corpus lives and what to call it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSource {
    pub path: String,
    /// Becomes `source_dataset` for rows that do not carry their own.
    pub schema_tag: String,
}

/// Which configured providers play which pipeline role.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Roles {
    pub generators: Vec<String>,
    pub judges: Vec<String>,
    pub detectors: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedder: Option<String>,
}

/// Backend for the factual-alignment score between a source and a rewrite.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scorer", deny_unknown_fields)]
pub enum AlignBackend {
    /// Scripted scores from a JSON rule file; for offline fixtures.
    Fixture { path: String },
    /// A local executable fed the pair on stdin, answering with one number.
    Command {
        program: String,
        #[serde(default)]
        args: Vec<String>,
    },
    /// An HTTP scoring service.
    Http { endpoint: String },
}

impl AlignBackend {
    /// The scorer name used in cache keys; replay must agree with live.
    pub fn scorer_name(&self) -> &'static str {
        match self {
            AlignBackend::Fixture { .. } => "fixture",
            AlignBackend::Command { .. } => "command",
            AlignBackend::Http { .. } => "http",
        }
    }
}

/// Where the factual thresholds come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// The published default pair.
    #[default]
    Paper,
    /// Derive the pair from this batch's score distributions.
    Compute,
}

impl ThresholdMode {
    pub fn to_choice(self) -> ThresholdChoice {
        match self {
            ThresholdMode::Paper => ThresholdChoice::PaperDefault,
            ThresholdMode::Compute => ThresholdChoice::ComputeFromBatch,
        }
    }

    pub fn from_token(token: &str) -> Option<ThresholdMode> {
        match token.to_ascii_lowercase().as_str() {
            "paper" => Some(ThresholdMode::Paper),
            "compute" => Some(ThresholdMode::Compute),
            _ => None,
        }
    }
}

fn default_seed() -> u64 {
    17
}

fn default_emit() -> Vec<String> {
    vec!["csv".to_string(), "markdown".to_string(), "plotdata".to_string()]
}

/// Everything a run needs, parsed from one JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusSource,
    pub out_dir: String,
    /// Model-call cache root; defaults to `<out_dir>/cache`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<String>,
    /// Prompt catalog directory; the compiled-in catalog when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog_dir: Option<String>,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub split: SplitRatios,
    #[serde(default)]
    pub clean: CleanConfig,
    #[serde(default)]
    pub label_rule: LabelRule,
    pub providers: Vec<ProviderConfig>,
    #[serde(default)]
    pub roles: Roles,
    /// Detection strategies to run; all ten when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategies: Option<Vec<String>>,
    #[serde(default)]
    pub thresholds: ThresholdMode,
    /// Extra refusal phrases beyond the built-in one.
    #[serde(default)]
    pub refusal_phrases: Vec<String>,
    /// Script file per mock-shaped provider id.
    #[serde(default)]
    pub mock_scripts: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align: Option<AlignBackend>,
    /// Report formats the evaluate stage writes.
    #[serde(default = "default_emit")]
    pub emit: Vec<String>,
}

impl RunConfig {
    /// Digest over the fields that change what a run computes. Output and
    /// cache locations and live/replay mode are excluded: they move bytes
    /// around without changing them.
    pub fn semantic_digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        let fields = value.as_object_mut().expect("config is a JSON object");
        fields.remove("out_dir");
        fields.remove("cache_dir");
        fields.remove("mode");
        hashing::sha256_hex(value.to_string().as_bytes())
    }

    pub fn provider(&self, id: &str) -> Option<&ProviderConfig> {
        self.providers.iter().find(|p| p.provider_id == id)
    }

    pub fn strategy_list(&self) -> Result<Vec<Strategy>> {
        match &self.strategies {
            None => Ok(Strategy::ALL.to_vec()),
            Some(tokens) => parse_strategy_tokens(tokens),
        }
    }

    pub fn emit_list(&self) -> Result<Vec<EmitFormat>> {
        parse_emit_tokens(&self.emit)
    }

    fn validate(&self) -> Result<()> {
        validate_providers(&self.providers)?;
        let ratio_sum = self.split.train + self.split.validation + self.split.test;
        self.split
            .validate()
            .map_err(|_| anyhow!("split ratios must be non-negative and sum to 1 (got {ratio_sum})"))?;
        if self.corpus.path.trim().is_empty() {
            bail!("corpus.path must not be empty");
        }
        if self.corpus.schema_tag.trim().is_empty() {
            bail!("corpus.schema_tag must not be empty");
        }
        if self.out_dir.trim().is_empty() {
            bail!("out_dir must not be empty");
        }

        let role_of = [
            ("generators", &self.roles.generators),
            ("judges", &self.roles.judges),
            ("detectors", &self.roles.detectors),
        ];
        for (role, ids) in role_of {
            for id in ids {
                if self.provider(id).is_none() {
                    bail!("roles.{role} references unknown provider {id:?}");
                }
            }
        }
        if let Some(id) = &self.roles.embedder {
            if self.provider(id).is_none() {
                bail!("roles.embedder references unknown provider {id:?}");
            }
        }

        for id in self.mock_scripts.keys() {
            match self.provider(id) {
                None => bail!("mock_scripts references unknown provider {id:?}"),
                Some(p) if p.api != ApiShape::Mock => {
                    bail!("mock_scripts entry for {id:?}, but its api is not \"mock\"")
                }
                Some(_) => {}
            }
        }
        if self.mode == RunMode::Live {
            for provider in &self.providers {
                if provider.api == ApiShape::Mock
                    && !self.mock_scripts.contains_key(&provider.provider_id)
                {
                    bail!(
                        "provider {:?} has api \"mock\" but no mock_scripts entry",
                        provider.provider_id
                    );
                }
            }
        }

        self.strategy_list()?;
        self.emit_list()?;
        Ok(())
    }
}

pub fn parse_strategy_tokens(tokens: &[String]) -> Result<Vec<Strategy>> {
    let mut strategies = Vec::with_capacity(tokens.len());
    for token in tokens {
        let strategy = Strategy::from_token(token)
            .ok_or_else(|| anyhow!("unknown detection strategy {token:?}"))?;
        if strategies.contains(&strategy) {
            bail!("detection strategy {token:?} listed twice");
        }
        strategies.push(strategy);
    }
    if strategies.is_empty() {
        bail!("strategy list must not be empty");
    }
    Ok(strategies)
}

/// Parse `kind/severity` generation-variant tokens, or `all` for all six.
pub fn parse_variant_tokens(spec: &str) -> Result<Vec<VariantId>> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(generation_variants());
    }
    let mut variants = Vec::new();
    for token in spec.split(',') {
        let token = token.trim();
        let (kind_token, severity_token) = token
            .split_once('/')
            .ok_or_else(|| anyhow!("variant {token:?} is not kind/severity"))?;
        let kind = match kind_token {
            "paraphrase" => GenerationKind::Paraphrase,
            "perturbation" => GenerationKind::Perturbation,
            other => bail!("unknown generation kind {other:?}"),
        };
        let severity = Severity::from_token(severity_token)
            .ok_or_else(|| anyhow!("unknown severity {severity_token:?}"))?;
        let variant = VariantId::Generation { kind, severity };
        if variants.contains(&variant) {
            bail!("variant {token:?} listed twice");
        }
        variants.push(variant);
    }
    if variants.is_empty() {
        bail!("variant list must not be empty");
    }
    Ok(variants)
}

pub fn parse_emit_tokens(tokens: &[String]) -> Result<Vec<EmitFormat>> {
    let mut formats = Vec::with_capacity(tokens.len());
    for token in tokens {
        let format = EmitFormat::from_token(token)
            .ok_or_else(|| anyhow!("unknown report format {token:?} (csv, markdown, plotdata)"))?;
        if !formats.contains(&format) {
            formats.push(format);
        }
    }
    if formats.is_empty() {
        bail!("emit list must not be empty");
    }
    Ok(formats)
}

/// A parsed configuration plus the directory its relative paths resolve
/// against (the config file's own directory).
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    base: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(LoadedConfig { config, base })
    }

    /// Resolve a config-relative path.
    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.resolve(&self.config.corpus.path)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.config.out_dir)
    }

    pub fn catalog_dir(&self) -> Option<PathBuf> {
        self.config.catalog_dir.as_deref().map(|d| self.resolve(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "corpus": {"path": "corpus.jsonl", "schema_tag": "demo"},
            "out_dir": "out",
            "providers": [{
                "provider_id": "gen-1",
                "model_name": "mock-model",
                "api": "mock",
                "rate_limit_rpm": 600
            }],
            "mock_scripts": {"gen-1": "mock.json"}
        })
    }

    fn parse(value: serde_json::Value) -> Result<RunConfig> {
        let config: RunConfig = serde_json::from_value(value)?;
        config.validate()?;
        Ok(config)
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config = parse(minimal()).unwrap();
        assert_eq!(config.seed, 17);
        assert_eq!(config.mode, RunMode::Live);
        assert_eq!(config.thresholds, ThresholdMode::Paper);
        assert_eq!(config.strategy_list().unwrap().len(), 10);
        assert_eq!(config.emit_list().unwrap().len(), 3);
    }

    #[test]
    fn unknown_role_ids_are_rejected() {
        let mut value = minimal();
        value["roles"] = serde_json::json!({"judges": ["nope"]});
        let err = parse(value).unwrap_err().to_string();
        assert!(err.contains("unknown provider \"nope\""), "{err}");
    }

    #[test]
    fn live_mock_provider_requires_a_script() {
        let mut value = minimal();
        value["mock_scripts"] = serde_json::json!({});
        let err = parse(value).unwrap_err().to_string();
        assert!(err.contains("no mock_scripts entry"), "{err}");

        // Replay never dispatches, so the script requirement disappears.
        let mut value = minimal();
        value["mock_scripts"] = serde_json::json!({});
        value["mode"] = serde_json::json!("replay");
        parse(value).unwrap();
    }

    #[test]
    fn digest_ignores_locations_but_not_substance() {
        let base = parse(minimal()).unwrap();

        let mut moved = base.clone();
        moved.out_dir = "elsewhere".to_string();
        moved.cache_dir = Some("warm".to_string());
        moved.mode = RunMode::Replay;
        assert_eq!(base.semantic_digest(), moved.semantic_digest());

        let mut reseeded = base.clone();
        reseeded.seed = 18;
        assert_ne!(base.semantic_digest(), reseeded.semantic_digest());

        let mut rescoped = base.clone();
        rescoped.strategies = Some(vec!["VaN".to_string()]);
        assert_ne!(base.semantic_digest(), rescoped.semantic_digest());
    }

    #[test]
    fn strategy_tokens_parse_case_insensitively() {
        let tokens = vec!["van".to_string(), "Z_CoT".to_string()];
        let parsed = parse_strategy_tokens(&tokens).unwrap();
        assert_eq!(parsed, vec![Strategy::VaN, Strategy::ZCoT]);
        assert!(parse_strategy_tokens(&["bogus".to_string()]).is_err());
    }
}
