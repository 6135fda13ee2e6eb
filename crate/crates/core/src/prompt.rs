//! The versioned prompt catalog: six severity-graded generation specs and
//! ten detection strategies, stored as plain-text files with a checksum
//! manifest so any drift in prompt wording fails loudly at load time.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Severity;
use crate::hashing;

/// Placeholder that marks where the news text is substituted.
pub const CONTENT_SLOT: &str = "{content}";

/// How a template composes with content: `prefix` puts the instruction
/// before the content (generation), `cloze` wraps the content so the final
/// instruction comes after it (detection).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    Prefix,
    Cloze,
}

/// The two generation modes: paraphrase preserves truth, perturbation
/// injects falsehoods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationKind {
    Paraphrase,
    Perturbation,
}

impl fmt::Display for GenerationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenerationKind::Paraphrase => "paraphrase",
            GenerationKind::Perturbation => "perturbation",
        })
    }
}

impl GenerationKind {
    pub const ALL: [GenerationKind; 2] = [GenerationKind::Paraphrase, GenerationKind::Perturbation];
}

/// The ten zero-shot detection strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "VaN")]
    VaN,
    #[serde(rename = "Z_CoT")]
    ZCoT,
    #[serde(rename = "X_CoT")]
    XCoT,
    #[serde(rename = "A_CoN")]
    ACoN,
    #[serde(rename = "MsReN")]
    MsReN,
    #[serde(rename = "MsReN_CoT")]
    MsReNCoT,
    #[serde(rename = "DeF_Gen")]
    DeFGen,
    #[serde(rename = "DeF_SpeC")]
    DeFSpeC,
    #[serde(rename = "Analyze_Cld2")]
    AnalyzeCld2,
    #[serde(rename = "Analyze_AI_GPT")]
    AnalyzeAiGpt,
}

impl Strategy {
    pub const ALL: [Strategy; 10] = [
        Strategy::VaN,
        Strategy::ZCoT,
        Strategy::XCoT,
        Strategy::ACoN,
        Strategy::MsReN,
        Strategy::MsReNCoT,
        Strategy::DeFGen,
        Strategy::DeFSpeC,
        Strategy::AnalyzeCld2,
        Strategy::AnalyzeAiGpt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::VaN => "VaN",
            Strategy::ZCoT => "Z_CoT",
            Strategy::XCoT => "X_CoT",
            Strategy::ACoN => "A_CoN",
            Strategy::MsReN => "MsReN",
            Strategy::MsReNCoT => "MsReN_CoT",
            Strategy::DeFGen => "DeF_Gen",
            Strategy::DeFSpeC => "DeF_SpeC",
            Strategy::AnalyzeCld2 => "Analyze_Cld2",
            Strategy::AnalyzeAiGpt => "Analyze_AI_GPT",
        }
    }

    pub fn from_token(token: &str) -> Option<Strategy> {
        Strategy::ALL
            .into_iter()
            .find(|s| s.name().eq_ignore_ascii_case(token))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Identity of one template in the catalog: a (kind, severity) pair for
/// generation or a strategy for detection. The representation makes the
/// illegal combinations (a severity on a detection spec, say)
/// unrepresentable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "VariantRepr", into = "VariantRepr")]
pub enum VariantId {
    Generation {
        kind: GenerationKind,
        severity: Severity,
    },
    Detection {
        strategy: Strategy,
    },
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariantId::Generation { kind, severity } => write!(f, "{kind}/{severity}"),
            VariantId::Detection { strategy } => write!(f, "detection/{strategy}"),
        }
    }
}

/// Wire form of [`VariantId`]: `kind` plus exactly one of `severity` or
/// `strategy`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct VariantRepr {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    severity: Option<Severity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strategy: Option<Strategy>,
}

impl From<VariantId> for VariantRepr {
    fn from(variant: VariantId) -> Self {
        match variant {
            VariantId::Generation { kind, severity } => VariantRepr {
                kind: kind.to_string(),
                severity: Some(severity),
                strategy: None,
            },
            VariantId::Detection { strategy } => VariantRepr {
                kind: "detection".to_string(),
                severity: None,
                strategy: Some(strategy),
            },
        }
    }
}

impl TryFrom<VariantRepr> for VariantId {
    type Error = String;

    fn try_from(repr: VariantRepr) -> Result<Self, Self::Error> {
        match repr.kind.as_str() {
            "paraphrase" | "perturbation" => {
                let kind = if repr.kind == "paraphrase" {
                    GenerationKind::Paraphrase
                } else {
                    GenerationKind::Perturbation
                };
                if repr.strategy.is_some() {
                    return Err(format!("variant kind {} cannot carry a strategy", repr.kind));
                }
                let severity = repr
                    .severity
                    .ok_or_else(|| format!("variant kind {} requires a severity", repr.kind))?;
                Ok(VariantId::Generation { kind, severity })
            }
            "detection" => {
                if repr.severity.is_some() {
                    return Err("detection variant cannot carry a severity".to_string());
                }
                let strategy = repr
                    .strategy
                    .ok_or_else(|| "detection variant requires a strategy".to_string())?;
                Ok(VariantId::Detection { strategy })
            }
            other => Err(format!("unknown variant kind {other:?}")),
        }
    }
}

/// The six generation variants in sweep order.
pub fn generation_variants() -> Vec<VariantId> {
    let mut variants = Vec::with_capacity(6);
    for kind in GenerationKind::ALL {
        for severity in [Severity::Minor, Severity::Major, Severity::Critical] {
            variants.push(VariantId::Generation { kind, severity });
        }
    }
    variants
}

/// The ten detection variants in strategy order.
pub fn detection_variants() -> Vec<VariantId> {
    Strategy::ALL
        .into_iter()
        .map(|strategy| VariantId::Detection { strategy })
        .collect()
}

/// One template: an impersonator line that sets the role, an instructor
/// that states the task, and a slot for the news text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub id: String,
    pub style: PromptStyle,
    pub variant: VariantId,
    pub impersonator: String,
    pub instructor: String,
    /// How the body text entered the catalog (`transcribed` vs
    /// `reconstructed`); carried through from the manifest for audit.
    pub provenance: String,
}

impl PromptSpec {
    /// The full template with the content slot in composition order:
    /// impersonator, instructor, content for prefix prompts; impersonator,
    /// content, instructor for cloze prompts (the content always precedes
    /// the final instruction a detector answers).
    pub fn template(&self) -> String {
        match self.style {
            PromptStyle::Prefix => format!(
                "{}\n\n{}\n\n{CONTENT_SLOT}",
                self.impersonator, self.instructor
            ),
            PromptStyle::Cloze => format!(
                "{}\n\n{CONTENT_SLOT}\n\n{}",
                self.impersonator, self.instructor
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("prompt {id}: content must be non-empty")]
    EmptyContent { id: String },
    #[error("prompt {id}: prefix prompts require a non-empty impersonator")]
    MissingImpersonator { id: String },
    #[error("prompt {id}: template must contain {CONTENT_SLOT} exactly once")]
    UnresolvedPlaceholder { id: String },
    #[error("catalog has no spec for variant {0}")]
    UnknownVariant(String),
    #[error("catalog file {name}: checksum mismatch (manifest {expected}, file {actual})")]
    ChecksumMismatch {
        name: String,
        expected: String,
        actual: String,
    },
    #[error("catalog: {0}")]
    Invalid(String),
    #[error("catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Substitute `content` into the spec's template.
///
/// Fails rather than degrade: empty content, a prefix spec with no
/// impersonator (role framing is what keeps generation providers
/// cooperative), or a template whose bodies smuggle in an extra content
/// slot are all hard errors.
pub fn render(spec: &PromptSpec, content: &str) -> Result<String, PromptError> {
    if content.trim().is_empty() {
        return Err(PromptError::EmptyContent { id: spec.id.clone() });
    }
    if spec.style == PromptStyle::Prefix && spec.impersonator.trim().is_empty() {
        return Err(PromptError::MissingImpersonator { id: spec.id.clone() });
    }
    let template = spec.template();
    if template.matches(CONTENT_SLOT).count() != 1 {
        return Err(PromptError::UnresolvedPlaceholder { id: spec.id.clone() });
    }
    Ok(template.replacen(CONTENT_SLOT, content, 1))
}

/// Composition-order notes recorded alongside the specs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Composition {
    pub prefix: String,
    pub cloze: String,
}

#[derive(Debug, Deserialize)]
struct Manifest {
    version: u32,
    composition: Composition,
    specs: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
struct ManifestEntry {
    id: String,
    file: String,
    style: PromptStyle,
    #[serde(flatten)]
    variant: VariantRepr,
    source: String,
    sha256: String,
}

/// The verified prompt catalog: exactly sixteen specs, one per variant.
pub struct Catalog {
    specs: Vec<PromptSpec>,
    by_variant: HashMap<VariantId, usize>,
    checksums: BTreeMap<String, String>,
    composition: Composition,
    version: u32,
}

const EMBEDDED_MANIFEST: &str = include_str!("../prompts/manifest.json");

const EMBEDDED_FILES: &[(&str, &str)] = &[
    ("paraphrase_minor.txt", include_str!("../prompts/paraphrase_minor.txt")),
    ("paraphrase_major.txt", include_str!("../prompts/paraphrase_major.txt")),
    ("paraphrase_critical.txt", include_str!("../prompts/paraphrase_critical.txt")),
    ("perturbation_minor.txt", include_str!("../prompts/perturbation_minor.txt")),
    ("perturbation_major.txt", include_str!("../prompts/perturbation_major.txt")),
    ("perturbation_critical.txt", include_str!("../prompts/perturbation_critical.txt")),
    ("detection_VaN.txt", include_str!("../prompts/detection_VaN.txt")),
    ("detection_Z_CoT.txt", include_str!("../prompts/detection_Z_CoT.txt")),
    ("detection_X_CoT.txt", include_str!("../prompts/detection_X_CoT.txt")),
    ("detection_A_CoN.txt", include_str!("../prompts/detection_A_CoN.txt")),
    ("detection_MsReN.txt", include_str!("../prompts/detection_MsReN.txt")),
    ("detection_MsReN_CoT.txt", include_str!("../prompts/detection_MsReN_CoT.txt")),
    ("detection_DeF_Gen.txt", include_str!("../prompts/detection_DeF_Gen.txt")),
    ("detection_DeF_SpeC.txt", include_str!("../prompts/detection_DeF_SpeC.txt")),
    ("detection_Analyze_Cld2.txt", include_str!("../prompts/detection_Analyze_Cld2.txt")),
    ("detection_Analyze_AI_GPT.txt", include_str!("../prompts/detection_Analyze_AI_GPT.txt")),
];

impl Catalog {
    /// The catalog compiled into the binary (the files under this crate's
    /// `prompts/` directory), verified by the same checksum path as a
    /// directory load.
    pub fn builtin() -> Result<Catalog, PromptError> {
        Catalog::build(EMBEDDED_MANIFEST, |name| {
            EMBEDDED_FILES
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, text)| text.to_string())
                .ok_or_else(|| PromptError::Invalid(format!("embedded file {name} missing")))
        })
    }

    /// Load and verify a catalog directory (a `manifest.json` plus one text
    /// file per spec).
    pub fn load(dir: &Path) -> Result<Catalog, PromptError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| PromptError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        let manifest = read("manifest.json")?;
        Catalog::build(&manifest, read)
    }

    fn build(
        manifest_json: &str,
        read_file: impl Fn(&str) -> Result<String, PromptError>,
    ) -> Result<Catalog, PromptError> {
        let manifest: Manifest = serde_json::from_str(manifest_json)
            .map_err(|e| PromptError::Invalid(format!("malformed manifest: {e}")))?;
        if manifest.specs.len() != 16 {
            return Err(PromptError::Invalid(format!(
                "expected 16 specs, manifest lists {}",
                manifest.specs.len()
            )));
        }

        let mut specs = Vec::with_capacity(16);
        let mut by_variant = HashMap::with_capacity(16);
        let mut checksums = BTreeMap::new();
        for entry in manifest.specs {
            let variant = VariantId::try_from(entry.variant.clone())
                .map_err(|e| PromptError::Invalid(format!("spec {}: {e}", entry.id)))?;
            let expected_style = match variant {
                VariantId::Generation { .. } => PromptStyle::Prefix,
                VariantId::Detection { .. } => PromptStyle::Cloze,
            };
            if entry.style != expected_style {
                return Err(PromptError::Invalid(format!(
                    "spec {}: style does not match variant {variant}",
                    entry.id
                )));
            }

            let text = read_file(&entry.file)?;
            let actual = hashing::sha256_hex(text.as_bytes());
            if actual != entry.sha256 {
                return Err(PromptError::ChecksumMismatch {
                    name: entry.file.clone(),
                    expected: entry.sha256.clone(),
                    actual,
                });
            }

            let (impersonator, instructor) = parse_spec_file(&entry.file, &text)?;
            let spec = PromptSpec {
                id: entry.id.clone(),
                style: entry.style,
                variant,
                impersonator,
                instructor,
                provenance: entry.source.clone(),
            };
            let index = specs.len();
            if by_variant.insert(variant, index).is_some() {
                return Err(PromptError::Invalid(format!(
                    "variant {variant} appears more than once"
                )));
            }
            checksums.insert(entry.id, entry.sha256);
            specs.push(spec);
        }

        for variant in generation_variants().into_iter().chain(detection_variants()) {
            if !by_variant.contains_key(&variant) {
                return Err(PromptError::Invalid(format!("variant {variant} missing")));
            }
        }

        Ok(Catalog {
            specs,
            by_variant,
            checksums,
            composition: manifest.composition,
            version: manifest.version,
        })
    }

    pub fn spec(&self, variant: &VariantId) -> Result<&PromptSpec, PromptError> {
        self.by_variant
            .get(variant)
            .map(|&i| &self.specs[i])
            .ok_or_else(|| PromptError::UnknownVariant(variant.to_string()))
    }

    pub fn specs(&self) -> &[PromptSpec] {
        &self.specs
    }

    /// Render the spec for `variant` around `content`.
    pub fn render_for(&self, variant: &VariantId, content: &str) -> Result<String, PromptError> {
        render(self.spec(variant)?, content)
    }

    /// Spec-id to sha256 map, recorded in run manifests so every artifact
    /// names the exact prompt wording that produced it.
    pub fn checksums(&self) -> &BTreeMap<String, String> {
        &self.checksums
    }

    pub fn composition(&self) -> &Composition {
        &self.composition
    }

    pub fn version(&self) -> u32 {
        self.version
    }
}

/// Parse a spec file: an `impersonator:` section and an `instructor:`
/// section, each holding free text on the following lines.
fn parse_spec_file(name: &str, text: &str) -> Result<(String, String), PromptError> {
    let mut impersonator: Option<Vec<&str>> = None;
    let mut instructor: Option<Vec<&str>> = None;
    let mut current: Option<&mut Vec<&str>> = None;
    for line in text.lines() {
        match line.trim() {
            "impersonator:" => {
                impersonator = Some(Vec::new());
                current = impersonator.as_mut();
            }
            "instructor:" => {
                instructor = Some(Vec::new());
                current = instructor.as_mut();
            }
            _ => match current.as_mut() {
                Some(section) => section.push(line),
                None if line.trim().is_empty() => {}
                None => {
                    return Err(PromptError::Invalid(format!(
                        "{name}: text before any section header"
                    )))
                }
            },
        }
    }
    let join = |section: Option<Vec<&str>>, header: &str| {
        section
            .map(|lines| lines.join("\n").trim().to_string())
            .ok_or_else(|| PromptError::Invalid(format!("{name}: missing `{header}` section")))
    };
    Ok((
        join(impersonator, "impersonator:")?,
        join(instructor, "instructor:")?,
    ))
}
