//! Live HTTP backend speaking the two supported endpoint shapes.

use serde_json::{json, Value};

use crate::config::{ApiShape, ProviderConfig};
use crate::transport::{Transport, TransportError};

/// HTTP transport. Credentials come exclusively from the environment
/// variable each provider names; they are read per request and never
/// stored or logged.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<HttpTransport, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(120))
            .build()
            .map_err(|err| TransportError::Fatal(format!("building http client: {err}")))?;
        Ok(HttpTransport { client })
    }

    fn credential(provider: &ProviderConfig) -> Result<String, TransportError> {
        if provider.auth_env_var.trim().is_empty() {
            return Err(TransportError::Auth(format!(
                "<unset auth_env_var for provider {}>",
                provider.provider_id
            )));
        }
        std::env::var(&provider.auth_env_var)
            .map_err(|_| TransportError::Auth(provider.auth_env_var.clone()))
    }

    fn post(
        &self,
        provider: &ProviderConfig,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
    ) -> Result<Value, TransportError> {
        let mut request = self.client.post(url).json(body);
        if let Some(token) = bearer {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|err| TransportError::Transient(format!("request to {}: {err}", provider.provider_id)))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(TransportError::Transient(format!(
                "provider {} answered {status}",
                provider.provider_id
            )));
        }
        if !status.is_success() {
            return Err(TransportError::Fatal(format!(
                "provider {} answered {status}",
                provider.provider_id
            )));
        }
        response
            .json()
            .map_err(|err| TransportError::Fatal(format!("provider {} sent invalid JSON: {err}", provider.provider_id)))
    }
}

fn field<'v>(value: &'v Value, path: &[&str]) -> Result<&'v Value, TransportError> {
    let mut current = value;
    for step in path {
        current = match step.parse::<usize>() {
            Ok(index) => current.get(index),
            Err(_) => current.get(*step),
        }
        .ok_or_else(|| {
            TransportError::Fatal(format!("response is missing field {}", path.join(".")))
        })?;
    }
    Ok(current)
}

fn text_at(value: &Value, path: &[&str]) -> Result<String, TransportError> {
    field(value, path)?
        .as_str()
        .map(|s| s.to_string())
        .ok_or_else(|| TransportError::Fatal(format!("field {} is not text", path.join("."))))
}

impl Transport for HttpTransport {
    fn dispatch(&self, provider: &ProviderConfig, prompt: &str) -> Result<String, TransportError> {
        let token = Self::credential(provider)?;
        match provider.api {
            ApiShape::OpenaiChat => {
                let mut body = json!({
                    "model": provider.model_name,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": provider.params.temperature,
                    "max_tokens": provider.params.max_tokens,
                    "n": provider.params.candidate_count,
                });
                if let Some(top_p) = provider.params.top_p {
                    body["top_p"] = json!(top_p);
                }
                let reply = self.post(provider, &provider.endpoint, Some(&token), &body)?;
                text_at(&reply, &["choices", "0", "message", "content"])
            }
            ApiShape::PalmText => {
                let mut body = json!({
                    "prompt": {"text": prompt},
                    "temperature": provider.params.temperature,
                    "maxOutputTokens": provider.params.max_tokens,
                    "candidateCount": provider.params.candidate_count,
                });
                if let Some(top_p) = provider.params.top_p {
                    body["topP"] = json!(top_p);
                }
                if let Some(top_k) = provider.params.top_k {
                    body["topK"] = json!(top_k);
                }
                let url = format!("{}?key={token}", provider.endpoint);
                let reply = self.post(provider, &url, None, &body)?;
                text_at(&reply, &["candidates", "0", "output"])
            }
            ApiShape::Mock => Err(TransportError::Fatal(format!(
                "provider {} is declared mock but reached the http backend",
                provider.provider_id
            ))),
        }
    }

    fn dispatch_embed(
        &self,
        provider: &ProviderConfig,
        text: &str,
    ) -> Result<Vec<f64>, TransportError> {
        let token = Self::credential(provider)?;
        let (url, bearer, body, path): (String, Option<&str>, Value, &[&str]) = match provider.api {
            ApiShape::OpenaiChat => (
                provider.endpoint.clone(),
                Some(token.as_str()),
                json!({"model": provider.model_name, "input": text}),
                &["data", "0", "embedding"],
            ),
            ApiShape::PalmText => (
                format!("{}?key={token}", provider.endpoint),
                None,
                json!({"text": text}),
                &["embedding", "value"],
            ),
            ApiShape::Mock => {
                return Err(TransportError::Fatal(format!(
                    "provider {} is declared mock but reached the http backend",
                    provider.provider_id
                )))
            }
        };
        let reply = self.post(provider, &url, bearer, &body)?;
        let values = field(&reply, path)?
            .as_array()
            .ok_or_else(|| TransportError::Fatal("embedding field is not an array".into()))?;
        values
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| TransportError::Fatal("embedding entry is not a number".into()))
            })
            .collect()
    }
}
