//! Provider configuration: model identity, decoding parameters, pacing and auth policy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("provider {provider}: temperature must be a finite, non-negative number")]
    BadTemperature { provider: String },
    #[error("provider {provider}: top_p must lie in (0, 1]")]
    BadTopP { provider: String },
    #[error("provider {provider}: max_tokens must be positive")]
    BadMaxTokens { provider: String },
    #[error("provider {provider}: candidate_count must be positive")]
    BadCandidateCount { provider: String },
    #[error("provider {provider}: rate_limit_rpm must be positive")]
    BadRateLimit { provider: String },
    #[error("provider {provider}: {field} must not be empty")]
    EmptyField { provider: String, field: &'static str },
    #[error("duplicate provider id {0}")]
    DuplicateProvider(String),
}

/// Which request/response wire shape the provider's endpoint speaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiShape {
    /// Chat-completions style: messages in, `choices[0].message.content` out.
    OpenaiChat,
    /// Text-generation style: a prompt object in, `candidates[0].output` out.
    PalmText,
    /// Never dispatches over the network; answered by a scripted backend.
    Mock,
}

/// Decoding parameters sent with every completion request. These are part
/// of the cache identity: changing any of them re-prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<u32>,
    pub max_tokens: u32,
    #[serde(default = "default_candidate_count")]
    pub candidate_count: u32,
}

fn default_candidate_count() -> u32 {
    1
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 1.0,
            top_p: Some(0.95),
            top_k: Some(40),
            max_tokens: 2048,
            candidate_count: 1,
        }
    }
}

/// One model endpoint the pipeline can talk to.
///
/// Auth never lives in this struct: `auth_env_var` names the environment
/// variable holding the credential, which is read at dispatch time only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub provider_id: String,
    pub model_name: String,
    pub api: ApiShape,
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub params: GenerationParams,
    pub rate_limit_rpm: u32,
    #[serde(default)]
    pub auth_env_var: String,
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let provider = self.provider_id.clone();
        if self.provider_id.trim().is_empty() {
            return Err(ConfigError::EmptyField { provider, field: "provider_id" });
        }
        if self.model_name.trim().is_empty() {
            return Err(ConfigError::EmptyField { provider, field: "model_name" });
        }
        if !(self.params.temperature.is_finite() && self.params.temperature >= 0.0) {
            return Err(ConfigError::BadTemperature { provider });
        }
        if let Some(top_p) = self.params.top_p {
            if !(top_p.is_finite() && top_p > 0.0 && top_p <= 1.0) {
                return Err(ConfigError::BadTopP { provider });
            }
        }
        if self.params.max_tokens == 0 {
            return Err(ConfigError::BadMaxTokens { provider });
        }
        if self.params.candidate_count == 0 {
            return Err(ConfigError::BadCandidateCount { provider });
        }
        if self.rate_limit_rpm == 0 {
            return Err(ConfigError::BadRateLimit { provider });
        }
        if matches!(self.api, ApiShape::OpenaiChat | ApiShape::PalmText)
            && self.endpoint.trim().is_empty()
        {
            return Err(ConfigError::EmptyField { provider, field: "endpoint" });
        }
        Ok(())
    }
}

/// Validate a provider roster: every entry well-formed, ids unique.
pub fn validate_providers(providers: &[ProviderConfig]) -> Result<(), ConfigError> {
    let mut seen = std::collections::HashSet::new();
    for provider in providers {
        provider.validate()?;
        if !seen.insert(provider.provider_id.as_str()) {
            return Err(ConfigError::DuplicateProvider(provider.provider_id.clone()));
        }
    }
    Ok(())
}
