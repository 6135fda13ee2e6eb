//! Cache-first completion gateway: pacing, bounded retries, refusal
//! detection, and replay of recorded exchanges.

use std::collections::HashMap;
use std::time::Duration;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{completion_key, embedding_key, Store, StoreError, NS_COMPLETIONS, NS_EMBEDDINGS};
use crate::config::ProviderConfig;
use crate::limiter::{Clock, RateLimiter, SystemClock};
use crate::record::{CompletionRecord, EmbeddingRecord, RecordStatus};
use crate::transport::{OfflineTransport, Transport, TransportError};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("auth environment variable {0} is not set; export it and re-run")]
    Auth(String),
    #[error("replay cache has no record for provider {provider} (key {key}); re-run live to record it")]
    ReplayMiss { provider: String, key: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("provider {provider} returned an empty embedding")]
    EmptyEmbedding { provider: String },
    #[error("provider {provider} changed embedding dimension from {expected} to {got}")]
    DimensionDrift { provider: String, expected: usize, got: usize },
    #[error("embedding for provider {provider} failed: {message}")]
    EmbeddingFailed { provider: String, message: String },
}

/// Counters for the run manifest: how much work the cache absorbed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub requests_sent: u64,
    pub retries: u64,
    pub refusals: u64,
    pub errors: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Live,
    Replay,
}

/// The phrase every backend's refusals are matched against (case-insensitively).
pub const DEFAULT_REFUSAL_PHRASE: &str = "sorry, i can't assist with that request";

/// Front door for all model traffic. Every exchange is recorded in the
/// content-addressed store, so a finished run can be replayed bit-for-bit
/// with no network and no credentials.
pub struct Gateway {
    store: Store,
    transport: Box<dyn Transport>,
    clock: Box<dyn Clock>,
    mode: Mode,
    limiters: HashMap<String, RateLimiter>,
    refusal_phrases: Vec<String>,
    max_attempts: u32,
    backoff_base: Duration,
    stats: GatewayStats,
    embed_dims: HashMap<String, usize>,
}

impl Gateway {
    /// Live gateway: serve from cache, dispatch misses to `transport`.
    pub fn live(store: Store, transport: Box<dyn Transport>) -> Gateway {
        Gateway::with_clock(store, transport, Box::new(SystemClock), Mode::Live)
    }

    /// Replay gateway: serve only from cache; any miss is an error.
    pub fn replay(store: Store) -> Gateway {
        Gateway::with_clock(store, Box::new(OfflineTransport), Box::new(SystemClock), Mode::Replay)
    }

    fn with_clock(
        store: Store,
        transport: Box<dyn Transport>,
        clock: Box<dyn Clock>,
        mode: Mode,
    ) -> Gateway {
        Gateway {
            store,
            transport,
            clock,
            mode,
            limiters: HashMap::new(),
            refusal_phrases: vec![DEFAULT_REFUSAL_PHRASE.to_string()],
            max_attempts: 5,
            backoff_base: Duration::from_millis(250),
            stats: GatewayStats::default(),
            embed_dims: HashMap::new(),
        }
    }

    /// Live gateway driven by an injected clock (tests pace with a
    /// simulated one).
    pub fn live_with_clock(store: Store, transport: Box<dyn Transport>, clock: Box<dyn Clock>) -> Gateway {
        Gateway::with_clock(store, transport, clock, Mode::Live)
    }

    pub fn is_replay(&self) -> bool {
        self.mode == Mode::Replay
    }

    pub fn add_refusal_phrase(&mut self, phrase: &str) {
        let phrase = phrase.to_lowercase();
        if !phrase.trim().is_empty() && !self.refusal_phrases.contains(&phrase) {
            self.refusal_phrases.push(phrase);
        }
    }

    pub fn set_backoff_base(&mut self, base: Duration) {
        self.backoff_base = base;
    }

    pub fn stats(&self) -> &GatewayStats {
        &self.stats
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn is_refusal(&self, response: &str) -> bool {
        let lowered = response.to_lowercase();
        self.refusal_phrases.iter().any(|phrase| lowered.contains(phrase))
    }

    fn timestamp() -> String {
        Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
    }

    /// Answer `prompt` through `provider`, consulting the cache first.
    ///
    /// Cached `ok` and `refused` records always short-circuit — a refusal
    /// is an answer, never re-prompted. Cached `error` records
    /// short-circuit only in replay; a live run attempts them again and
    /// overwrites the record with whatever happens this time.
    pub fn complete(
        &mut self,
        provider: &ProviderConfig,
        prompt: &str,
    ) -> Result<CompletionRecord, GatewayError> {
        let key = completion_key(&provider.provider_id, &provider.model_name, &provider.params, prompt);
        if let Some(record) = self.store.get::<CompletionRecord>(NS_COMPLETIONS, &key)? {
            if self.mode == Mode::Replay || record.status != RecordStatus::Error {
                self.stats.cache_hits += 1;
                return Ok(record);
            }
        }
        if self.mode == Mode::Replay {
            return Err(GatewayError::ReplayMiss {
                provider: provider.provider_id.clone(),
                key,
            });
        }
        self.stats.cache_misses += 1;

        let mut last_error = String::new();
        let mut outcome: Option<(String, u64)> = None;
        for attempt in 1..=self.max_attempts {
            let limiter = self
                .limiters
                .entry(provider.provider_id.clone())
                .or_insert_with(|| RateLimiter::new(provider.rate_limit_rpm));
            let started = limiter.acquire(self.clock.as_ref());
            self.stats.requests_sent += 1;
            match self.transport.dispatch(provider, prompt) {
                Ok(text) => {
                    let latency = self.clock.now().duration_since(started).as_millis() as u64;
                    outcome = Some((text, latency));
                    break;
                }
                Err(TransportError::Auth(var)) => return Err(GatewayError::Auth(var)),
                Err(TransportError::Fatal(message)) => {
                    last_error = message;
                    break;
                }
                Err(TransportError::Transient(message)) => {
                    last_error = message;
                    if attempt < self.max_attempts {
                        self.stats.retries += 1;
                        let backoff = self.backoff_base * 2u32.pow(attempt - 1);
                        self.clock.sleep(backoff);
                    }
                }
            }
        }

        let record = match outcome {
            Some((text, latency_ms)) => {
                let status = if self.is_refusal(&text) {
                    self.stats.refusals += 1;
                    RecordStatus::Refused
                } else {
                    RecordStatus::Ok
                };
                CompletionRecord {
                    cache_key: key.clone(),
                    provider_id: provider.provider_id.clone(),
                    model: provider.model_name.clone(),
                    prompt: prompt.to_string(),
                    response_text: text,
                    status,
                    latency_ms,
                    timestamp: Self::timestamp(),
                    error: None,
                }
            }
            None => {
                self.stats.errors += 1;
                CompletionRecord {
                    cache_key: key.clone(),
                    provider_id: provider.provider_id.clone(),
                    model: provider.model_name.clone(),
                    prompt: prompt.to_string(),
                    response_text: String::new(),
                    status: RecordStatus::Error,
                    latency_ms: 0,
                    timestamp: Self::timestamp(),
                    error: Some(last_error),
                }
            }
        };
        self.store.put(NS_COMPLETIONS, &key, &record)?;
        Ok(record)
    }

    /// Embed `text` through `provider`, consulting the cache first.
    ///
    /// Embeddings feed numeric diagnostics, so failures are hard errors
    /// rather than recorded placeholders, and a provider that changes its
    /// embedding dimension mid-run is rejected.
    pub fn embed(
        &mut self,
        provider: &ProviderConfig,
        text: &str,
    ) -> Result<EmbeddingRecord, GatewayError> {
        let key = embedding_key(&provider.provider_id, &provider.model_name, text);
        if let Some(record) = self.store.get::<EmbeddingRecord>(NS_EMBEDDINGS, &key)? {
            self.stats.cache_hits += 1;
            self.check_dimension(&provider.provider_id, record.embedding.len())?;
            return Ok(record);
        }
        if self.mode == Mode::Replay {
            return Err(GatewayError::ReplayMiss {
                provider: provider.provider_id.clone(),
                key,
            });
        }
        self.stats.cache_misses += 1;

        let mut last_error = String::new();
        let mut vector: Option<(Vec<f64>, u64)> = None;
        for attempt in 1..=self.max_attempts {
            let limiter = self
                .limiters
                .entry(provider.provider_id.clone())
                .or_insert_with(|| RateLimiter::new(provider.rate_limit_rpm));
            let started = limiter.acquire(self.clock.as_ref());
            self.stats.requests_sent += 1;
            match self.transport.dispatch_embed(provider, text) {
                Ok(values) => {
                    let latency = self.clock.now().duration_since(started).as_millis() as u64;
                    vector = Some((values, latency));
                    break;
                }
                Err(TransportError::Auth(var)) => return Err(GatewayError::Auth(var)),
                Err(TransportError::Fatal(message)) => {
                    last_error = message;
                    break;
                }
                Err(TransportError::Transient(message)) => {
                    last_error = message;
                    if attempt < self.max_attempts {
                        self.stats.retries += 1;
                        let backoff = self.backoff_base * 2u32.pow(attempt - 1);
                        self.clock.sleep(backoff);
                    }
                }
            }
        }

        let (embedding, latency_ms) = vector.ok_or_else(|| {
            self.stats.errors += 1;
            GatewayError::EmbeddingFailed {
                provider: provider.provider_id.clone(),
                message: last_error.clone(),
            }
        })?;
        if embedding.is_empty() {
            return Err(GatewayError::EmptyEmbedding { provider: provider.provider_id.clone() });
        }
        self.check_dimension(&provider.provider_id, embedding.len())?;
        let record = EmbeddingRecord {
            cache_key: key.clone(),
            provider_id: provider.provider_id.clone(),
            model: provider.model_name.clone(),
            text: text.to_string(),
            embedding,
            latency_ms,
            timestamp: Self::timestamp(),
        };
        self.store.put(NS_EMBEDDINGS, &key, &record)?;
        Ok(record)
    }

    fn check_dimension(&mut self, provider_id: &str, got: usize) -> Result<(), GatewayError> {
        match self.embed_dims.get(provider_id) {
            Some(&expected) if expected != got => Err(GatewayError::DimensionDrift {
                provider: provider_id.to_string(),
                expected,
                got,
            }),
            Some(_) => Ok(()),
            None => {
                self.embed_dims.insert(provider_id.to_string(), got);
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ApiShape, GenerationParams};
    use crate::limiter::SimClock;
    use crate::transport::{MockFailure, MockFailureKind, MockRule, MockScript, MockTransport};
    use std::sync::atomic::{AtomicU64, Ordering};
    use std::sync::Arc;

    fn provider(id: &str) -> ProviderConfig {
        ProviderConfig {
            provider_id: id.into(),
            model_name: "mock-model".into(),
            api: ApiShape::Mock,
            endpoint: String::new(),
            params: GenerationParams::default(),
            rate_limit_rpm: 600,
            auth_env_var: String::new(),
        }
    }

    /// Counts dispatches so tests can prove the cache short-circuited.
    struct CountingTransport {
        inner: MockTransport,
        calls: Arc<AtomicU64>,
    }

    impl Transport for CountingTransport {
        fn dispatch(&self, provider: &ProviderConfig, prompt: &str) -> Result<String, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.dispatch(provider, prompt)
        }

        fn dispatch_embed(
            &self,
            provider: &ProviderConfig,
            text: &str,
        ) -> Result<Vec<f64>, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.dispatch_embed(provider, text)
        }
    }

    fn counting(script: MockScript) -> (CountingTransport, Arc<AtomicU64>) {
        let calls = Arc::new(AtomicU64::new(0));
        (CountingTransport { inner: MockTransport::new(script), calls: calls.clone() }, calls)
    }

    fn sim_gateway(store: Store, transport: impl Transport + 'static) -> Gateway {
        let mut gateway =
            Gateway::with_clock(store, Box::new(transport), Box::new(SimClock::new()), Mode::Live);
        gateway.set_backoff_base(Duration::from_millis(1));
        gateway
    }

    #[test]
    fn second_identical_request_is_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let (transport, calls) = counting(MockScript {
            default_response: Some("an answer".into()),
            ..MockScript::default()
        });
        let mut gateway = sim_gateway(Store::open(dir.path()).unwrap(), transport);
        let p = provider("alpha");
        let first = gateway.complete(&p, "what happened?").unwrap();
        let second = gateway.complete(&p, "what happened?").unwrap();
        assert_eq!(first, second);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert_eq!(gateway.stats().cache_hits, 1);
        assert_eq!(gateway.stats().cache_misses, 1);
    }

    #[test]
    fn refusals_are_recorded_and_never_reprompted() {
        let dir = tempfile::tempdir().unwrap();
        let (transport, calls) = counting(MockScript {
            default_response: Some("Sorry, I can't assist with that request.".into()),
            ..MockScript::default()
        });
        let mut gateway = sim_gateway(Store::open(dir.path()).unwrap(), transport);
        let p = provider("alpha");
        let record = gateway.complete(&p, "rewrite this").unwrap();
        assert_eq!(record.status, RecordStatus::Refused);
        let again = gateway.complete(&p, "rewrite this").unwrap();
        assert_eq!(again.status, RecordStatus::Refused);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert_eq!(gateway.stats().refusals, 1);
    }

    #[test]
    fn transient_failures_retry_with_backoff_then_succeed() {
        let dir = tempfile::tempdir().unwrap();
        let (transport, calls) = counting(MockScript {
            rules: vec![MockRule {
                when_contains: vec!["flaky".into()],
                respond: "recovered".into(),
                fail: Some(MockFailure {
                    kind: MockFailureKind::Transient,
                    message: "scripted timeout".into(),
                    times: Some(2),
                }),
            }],
            ..MockScript::default()
        });
        let mut gateway = sim_gateway(Store::open(dir.path()).unwrap(), transport);
        let record = gateway.complete(&provider("alpha"), "flaky question").unwrap();
        assert_eq!(record.status, RecordStatus::Ok);
        assert_eq!(record.response_text, "recovered");
        assert_eq!(calls.load(Ordering::SeqCst), 3);
        assert_eq!(gateway.stats().retries, 2);
    }

    #[test]
    fn exhausted_retries_become_an_error_record() {
        let dir = tempfile::tempdir().unwrap();
        let (transport, calls) = counting(MockScript {
            rules: vec![MockRule {
                when_contains: vec![],
                respond: String::new(),
                fail: Some(MockFailure {
                    kind: MockFailureKind::Transient,
                    message: "always down".into(),
                    times: None,
                }),
            }],
            ..MockScript::default()
        });
        let mut gateway = sim_gateway(Store::open(dir.path()).unwrap(), transport);
        let record = gateway.complete(&provider("alpha"), "q").unwrap();
        assert_eq!(record.status, RecordStatus::Error);
        assert_eq!(record.error.as_deref(), Some("always down"));
        assert_eq!(calls.load(Ordering::SeqCst), 5);
        assert_eq!(gateway.stats().errors, 1);
    }

    #[test]
    fn fatal_failures_do_not_retry() {
        let dir = tempfile::tempdir().unwrap();
        let (transport, calls) = counting(MockScript::default());
        let mut gateway = sim_gateway(Store::open(dir.path()).unwrap(), transport);
        let record = gateway.complete(&provider("alpha"), "unmatched").unwrap();
        assert_eq!(record.status, RecordStatus::Error);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn live_runs_reattempt_cached_error_records() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let (down, _) = counting(MockScript {
            rules: vec![MockRule {
                when_contains: vec![],
                respond: String::new(),
                fail: Some(MockFailure {
                    kind: MockFailureKind::Fatal,
                    message: "service down".into(),
                    times: None,
                }),
            }],
            ..MockScript::default()
        });
        let mut gateway = sim_gateway(store.clone(), down);
        let p = provider("alpha");
        assert_eq!(gateway.complete(&p, "q").unwrap().status, RecordStatus::Error);

        let (up, calls) = counting(MockScript {
            default_response: Some("back online".into()),
            ..MockScript::default()
        });
        let mut gateway = sim_gateway(store, up);
        let record = gateway.complete(&p, "q").unwrap();
        assert_eq!(record.status, RecordStatus::Ok);
        assert_eq!(record.response_text, "back online");
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn auth_errors_abort_without_writing_a_record() {
        struct AuthlessTransport;
        impl Transport for AuthlessTransport {
            fn dispatch(&self, _p: &ProviderConfig, _q: &str) -> Result<String, TransportError> {
                Err(TransportError::Auth("SOME_API_KEY".into()))
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut gateway = sim_gateway(store.clone(), AuthlessTransport);
        match gateway.complete(&provider("alpha"), "q") {
            Err(GatewayError::Auth(var)) => assert_eq!(var, "SOME_API_KEY"),
            other => panic!("expected auth error, got {other:?}"),
        }
        assert_eq!(store.count(NS_COMPLETIONS).unwrap(), 0);
    }

    #[test]
    fn replay_serves_every_cached_status_and_errors_on_miss() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let (transport, _) = counting(MockScript {
            rules: vec![
                MockRule {
                    when_contains: vec!["refuse me".into()],
                    respond: "Sorry, I can't assist with that request.".into(),
                    fail: None,
                },
                MockRule {
                    when_contains: vec!["break".into()],
                    respond: String::new(),
                    fail: Some(MockFailure {
                        kind: MockFailureKind::Fatal,
                        message: "scripted outage".into(),
                        times: None,
                    }),
                },
            ],
            default_response: Some("plain answer".into()),
            ..MockScript::default()
        });
        let mut live = sim_gateway(store.clone(), transport);
        let p = provider("alpha");
        live.complete(&p, "plain question").unwrap();
        live.complete(&p, "refuse me").unwrap();
        live.complete(&p, "break things").unwrap();

        let mut replay = Gateway::replay(store);
        assert_eq!(replay.complete(&p, "plain question").unwrap().status, RecordStatus::Ok);
        assert_eq!(replay.complete(&p, "refuse me").unwrap().status, RecordStatus::Refused);
        // Replay returns the cached failure as-is instead of re-attempting.
        assert_eq!(replay.complete(&p, "break things").unwrap().status, RecordStatus::Error);
        assert!(matches!(
            replay.complete(&p, "never asked before"),
            Err(GatewayError::ReplayMiss { .. })
        ));
        assert_eq!(replay.stats().cache_hits, 3);
        assert_eq!(replay.stats().requests_sent, 0);
    }

    #[test]
    fn pacing_goes_through_the_injected_clock() {
        let dir = tempfile::tempdir().unwrap();
        let (transport, _) = counting(MockScript {
            default_response: Some("ok".into()),
            ..MockScript::default()
        });
        let clock = SimClock::new();
        let mut gateway = Gateway::with_clock(
            Store::open(dir.path()).unwrap(),
            Box::new(transport),
            Box::new(clock),
            Mode::Live,
        );
        let mut p = provider("alpha");
        p.rate_limit_rpm = 2;
        // Three distinct prompts: the third must wait for the window.
        gateway.complete(&p, "one").unwrap();
        gateway.complete(&p, "two").unwrap();
        gateway.complete(&p, "three").unwrap();
        assert_eq!(gateway.stats().requests_sent, 3);
    }

    #[test]
    fn embeddings_cache_and_enforce_dimension_consistency() {
        let dir = tempfile::tempdir().unwrap();
        let (transport, calls) = counting(MockScript {
            embed_rules: vec![
                MockEmbedRuleHelper::rule("wide", vec![1.0, 0.0, 0.0]),
                MockEmbedRuleHelper::rule("narrow", vec![1.0, 0.0]),
            ],
            ..MockScript::default()
        });
        let mut gateway = sim_gateway(Store::open(dir.path()).unwrap(), transport);
        let p = provider("alpha");
        let first = gateway.embed(&p, "wide text").unwrap();
        assert_eq!(first.embedding.len(), 3);
        let again = gateway.embed(&p, "wide text").unwrap();
        assert_eq!(first, again);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert!(matches!(
            gateway.embed(&p, "narrow text"),
            Err(GatewayError::DimensionDrift { expected: 3, got: 2, .. })
        ));
    }

    struct MockEmbedRuleHelper;
    impl MockEmbedRuleHelper {
        fn rule(needle: &str, vector: Vec<f64>) -> crate::transport::MockEmbedRule {
            crate::transport::MockEmbedRule { when_contains: vec![needle.into()], vector }
        }
    }
}
