//! Durable records of every model exchange, cached by content address.

use serde::{Deserialize, Serialize};

/// How a completion attempt ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    /// The model answered.
    Ok,
    /// The model declined (matched a refusal phrase); never re-prompted.
    Refused,
    /// Transport failed after retries; a live run may attempt this again.
    Error,
}

/// One completed (or failed) prompt exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub cache_key: String,
    pub provider_id: String,
    pub model: String,
    pub prompt: String,
    pub response_text: String,
    pub status: RecordStatus,
    pub latency_ms: u64,
    /// RFC 3339 UTC time of the exchange (or of the failure).
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CompletionRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RecordStatus::Ok
    }
}

/// One embedding exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub cache_key: String,
    pub provider_id: String,
    pub model: String,
    pub text: String,
    pub embedding: Vec<f64>,
    pub latency_ms: u64,
    pub timestamp: String,
}
