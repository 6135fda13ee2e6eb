//! Model access layer: provider configs, content-addressed caching, pacing,
//! retries, refusal detection, and offline replay.

pub mod cache;
pub mod config;
pub mod gateway;
pub mod http;
pub mod limiter;
pub mod record;
pub mod transport;

pub use cache::{
    completion_key, embedding_key, score_key, Store, StoreError, NS_COMPLETIONS, NS_EMBEDDINGS,
    NS_SCORES,
};
pub use config::{validate_providers, ApiShape, ConfigError, GenerationParams, ProviderConfig};
pub use gateway::{Gateway, GatewayError, GatewayStats, DEFAULT_REFUSAL_PHRASE};
pub use http::HttpTransport;
pub use record::{CompletionRecord, EmbeddingRecord, RecordStatus};
pub use transport::{
    MockEmbedRule, MockFailure, MockFailureKind, MockRule, MockScript, MockTransport,
    OfflineTransport, RoutingTransport, Transport, TransportError,
};
