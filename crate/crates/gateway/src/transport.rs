//! Pluggable backends that actually answer prompts: scripted mocks for
//! offline runs and a replay stub for cache-only execution.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ProviderConfig;

#[derive(Debug, Error)]
pub enum TransportError {
    /// Worth retrying: timeouts, rate-limit responses, 5xx.
    #[error("transient transport failure: {0}")]
    Transient(String),
    /// Not worth retrying: malformed request, unknown rule, 4xx.
    #[error("transport failure: {0}")]
    Fatal(String),
    /// Credential missing. Surfaces as a run-stopping error, never as a
    /// cached error record, so a fixed environment re-runs cleanly.
    #[error("auth environment variable {0} is not set")]
    Auth(String),
}

/// A backend that can answer completion (and optionally embedding)
/// requests for a provider.
pub trait Transport: Send + Sync {
    fn dispatch(&self, provider: &ProviderConfig, prompt: &str) -> Result<String, TransportError>;

    fn dispatch_embed(
        &self,
        provider: &ProviderConfig,
        _text: &str,
    ) -> Result<Vec<f64>, TransportError> {
        Err(TransportError::Fatal(format!(
            "backend for provider {} does not serve embeddings",
            provider.provider_id
        )))
    }
}

// ---------------------------------------------------------------------------
// Scripted mock
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockFailureKind {
    Transient,
    Fatal,
}

/// Scripted failure attached to a rule. With `times: Some(n)` the rule
/// fails the first `n` matching calls and answers normally afterwards —
/// exactly what retry tests need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockFailure {
    pub kind: MockFailureKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<u32>,
}

/// One scripted answer: fires when the prompt contains every
/// `when_contains` needle. First matching rule wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    pub when_contains: Vec<String>,
    #[serde(default)]
    pub respond: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail: Option<MockFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEmbedRule {
    pub when_contains: Vec<String>,
    pub vector: Vec<f64>,
}

/// Declarative script for a [`MockTransport`], loadable from JSON so
/// fixtures can live next to the corpus they answer for.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_response: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub embed_rules: Vec<MockEmbedRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_embedding: Option<Vec<f64>>,
}

/// Deterministic scripted backend. The only mutable state is the
/// per-rule countdown of scripted failures.
pub struct MockTransport {
    script: MockScript,
    failures_left: Mutex<Vec<u32>>,
}

impl MockTransport {
    pub fn new(script: MockScript) -> MockTransport {
        let failures_left = script
            .rules
            .iter()
            .map(|rule| rule.fail.as_ref().and_then(|f| f.times).unwrap_or(0))
            .collect();
        MockTransport { script, failures_left: Mutex::new(failures_left) }
    }

    pub fn from_file(path: &Path) -> Result<MockTransport, TransportError> {
        let bytes = std::fs::read(path)
            .map_err(|err| TransportError::Fatal(format!("reading mock script {}: {err}", path.display())))?;
        let script: MockScript = serde_json::from_slice(&bytes)
            .map_err(|err| TransportError::Fatal(format!("parsing mock script {}: {err}", path.display())))?;
        Ok(MockTransport::new(script))
    }
}

fn matches_all(prompt: &str, needles: &[String]) -> bool {
    needles.iter().all(|needle| prompt.contains(needle.as_str()))
}

impl Transport for MockTransport {
    fn dispatch(&self, provider: &ProviderConfig, prompt: &str) -> Result<String, TransportError> {
        for (index, rule) in self.script.rules.iter().enumerate() {
            if !matches_all(prompt, &rule.when_contains) {
                continue;
            }
            if let Some(failure) = &rule.fail {
                let fire = match failure.times {
                    None => true,
                    Some(_) => {
                        let mut left = self.failures_left.lock().unwrap();
                        if left[index] > 0 {
                            left[index] -= 1;
                            true
                        } else {
                            false
                        }
                    }
                };
                if fire {
                    return Err(match failure.kind {
                        MockFailureKind::Transient => TransportError::Transient(failure.message.clone()),
                        MockFailureKind::Fatal => TransportError::Fatal(failure.message.clone()),
                    });
                }
            }
            return Ok(rule.respond.clone());
        }
        if let Some(default) = &self.script.default_response {
            return Ok(default.clone());
        }
        Err(TransportError::Fatal(format!(
            "no scripted answer for provider {} matches this prompt",
            provider.provider_id
        )))
    }

    fn dispatch_embed(
        &self,
        provider: &ProviderConfig,
        text: &str,
    ) -> Result<Vec<f64>, TransportError> {
        for rule in &self.script.embed_rules {
            if matches_all(text, &rule.when_contains) {
                return Ok(rule.vector.clone());
            }
        }
        if let Some(default) = &self.script.default_embedding {
            return Ok(default.clone());
        }
        Err(TransportError::Fatal(format!(
            "no scripted embedding for provider {} matches this text",
            provider.provider_id
        )))
    }
}

// ---------------------------------------------------------------------------
// Per-provider routing
// ---------------------------------------------------------------------------

/// Routes each request to the backend registered for its provider id,
/// falling back to a shared default when one is set.
#[derive(Default)]
pub struct RoutingTransport {
    routes: std::collections::HashMap<String, Box<dyn Transport>>,
    fallback: Option<Box<dyn Transport>>,
}

impl RoutingTransport {
    pub fn new() -> RoutingTransport {
        RoutingTransport::default()
    }

    pub fn route(mut self, provider_id: &str, transport: Box<dyn Transport>) -> RoutingTransport {
        self.routes.insert(provider_id.to_string(), transport);
        self
    }

    pub fn fallback(mut self, transport: Box<dyn Transport>) -> RoutingTransport {
        self.fallback = Some(transport);
        self
    }

    fn backend(&self, provider: &ProviderConfig) -> Result<&dyn Transport, TransportError> {
        self.routes
            .get(&provider.provider_id)
            .or(self.fallback.as_ref())
            .map(|boxed| boxed.as_ref())
            .ok_or_else(|| {
                TransportError::Fatal(format!(
                    "no backend registered for provider {}",
                    provider.provider_id
                ))
            })
    }
}

impl Transport for RoutingTransport {
    fn dispatch(&self, provider: &ProviderConfig, prompt: &str) -> Result<String, TransportError> {
        self.backend(provider)?.dispatch(provider, prompt)
    }

    fn dispatch_embed(
        &self,
        provider: &ProviderConfig,
        text: &str,
    ) -> Result<Vec<f64>, TransportError> {
        self.backend(provider)?.dispatch_embed(provider, text)
    }
}

// ---------------------------------------------------------------------------
// Replay stub
// ---------------------------------------------------------------------------

/// Backend for cache-only replay. Reaching it at all means the cache
/// missed, which replay defines as failure.
#[derive(Debug, Default)]
pub struct OfflineTransport;

impl Transport for OfflineTransport {
    fn dispatch(&self, provider: &ProviderConfig, _prompt: &str) -> Result<String, TransportError> {
        Err(TransportError::Fatal(format!(
            "offline replay has no cached completion for provider {}",
            provider.provider_id
        )))
    }

    fn dispatch_embed(
        &self,
        provider: &ProviderConfig,
        _text: &str,
    ) -> Result<Vec<f64>, TransportError> {
        Err(TransportError::Fatal(format!(
            "offline replay has no cached embedding for provider {}",
            provider.provider_id
        )))
    }
}
