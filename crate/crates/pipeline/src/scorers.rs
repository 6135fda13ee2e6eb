//! Alignment scorer backends: recorded fixtures, a local command adapter,
//! an HTTP service, and a caching wrapper over any of them.

use std::path::Path;
use std::process::{Command, Stdio};

use f3_core::exec;
use f3_core::purify::{PairScorer, ScorerError};
use f3_gateway::{score_key, Store, NS_SCORES};
use serde::{Deserialize, Serialize};

fn check_range(name: &str, value: f64) -> Result<f64, ScorerError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ScorerError::OutOfRange { name: name.to_string(), value })
    }
}

// ---------------------------------------------------------------------------
// Fixture scorer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureScoreRule {
    /// Every needle must appear in the source or the generated text.
    pub when_contains: Vec<String>,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureScript {
    #[serde(default)]
    pub rules: Vec<FixtureScoreRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_score: Option<f64>,
}

/// Deterministic scorer answering from declarative rules — the offline
/// stand-in for an alignment model. First matching rule wins.
#[derive(Debug, Clone)]
pub struct FixtureScorer {
    name: String,
    script: FixtureScript,
}

impl FixtureScorer {
    pub fn new(script: FixtureScript) -> FixtureScorer {
        FixtureScorer { name: "fixture".to_string(), script }
    }

    pub fn from_file(path: &Path) -> Result<FixtureScorer, ScorerError> {
        let bytes = std::fs::read(path).map_err(|err| ScorerError::Failed {
            name: "fixture".to_string(),
            message: format!("reading {}: {err}", path.display()),
        })?;
        let script = serde_json::from_slice(&bytes).map_err(|err| ScorerError::Failed {
            name: "fixture".to_string(),
            message: format!("parsing {}: {err}", path.display()),
        })?;
        Ok(FixtureScorer::new(script))
    }
}

impl PairScorer for FixtureScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, source: &str, generated: &str) -> Result<f64, ScorerError> {
        for rule in &self.script.rules {
            let hit = rule
                .when_contains
                .iter()
                .all(|needle| source.contains(needle.as_str()) || generated.contains(needle.as_str()));
            if hit {
                return check_range(&self.name, rule.score);
            }
        }
        match self.script.default_score {
            Some(score) => check_range(&self.name, score),
            None => Err(ScorerError::Failed {
                name: self.name.clone(),
                message: "no fixture rule matches this pair".to_string(),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Local command adapter
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PairPayload<'a> {
    source: &'a str,
    generated: &'a str,
}

/// Runs a local program per pair: the pair goes to stdin as JSON
/// (`{"source": ..., "generated": ...}`), the score comes back as a bare
/// number on stdout.
#[derive(Debug, Clone)]
pub struct CommandScorer {
    name: String,
    program: String,
    args: Vec<String>,
}

impl CommandScorer {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> CommandScorer {
        CommandScorer { name: "command".to_string(), program: program.into(), args }
    }
}

impl PairScorer for CommandScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, source: &str, generated: &str) -> Result<f64, ScorerError> {
        let fail = |message: String| ScorerError::Failed { name: self.name.clone(), message };
        let payload = serde_json::to_vec(&PairPayload { source, generated })
            .map_err(|err| fail(format!("encoding pair: {err}")))?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|err| fail(format!("spawning {}: {err}", self.program)))?;
        use std::io::Write as _;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(&payload)
            .map_err(|err| fail(format!("writing to {}: {err}", self.program)))?;
        let output = child
            .wait_with_output()
            .map_err(|err| fail(format!("waiting for {}: {err}", self.program)))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Err(fail(format!("{} exited with {}: {}", self.program, output.status, stderr.trim())));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let value: f64 = stdout
            .trim()
            .parse()
            .map_err(|_| fail(format!("{} printed {:?}, not a number", self.program, stdout.trim())))?;
        check_range(&self.name, value)
    }
}

// ---------------------------------------------------------------------------
// HTTP service adapter
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct ScoreReply {
    score: f64,
}

/// POSTs each pair to a scoring service and reads `{"score": ...}` back.
pub struct HttpScorer {
    name: String,
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpScorer {
    pub fn new(endpoint: impl Into<String>) -> Result<HttpScorer, ScorerError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .map_err(|err| ScorerError::Failed {
                name: "http".to_string(),
                message: format!("building client: {err}"),
            })?;
        Ok(HttpScorer { name: "http".to_string(), endpoint: endpoint.into(), client })
    }
}

impl PairScorer for HttpScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, source: &str, generated: &str) -> Result<f64, ScorerError> {
        let fail = |message: String| ScorerError::Failed { name: self.name.clone(), message };
        let response = self
            .client
            .post(&self.endpoint)
            .json(&PairPayload { source, generated })
            .send()
            .map_err(|err| fail(format!("request to {}: {err}", self.endpoint)))?;
        if !response.status().is_success() {
            return Err(fail(format!("{} answered {}", self.endpoint, response.status())));
        }
        let reply: ScoreReply = response
            .json()
            .map_err(|err| fail(format!("{} sent invalid JSON: {err}", self.endpoint)))?;
        check_range(&self.name, reply.score)
    }
}

// ---------------------------------------------------------------------------
// Caching and replay
// ---------------------------------------------------------------------------

/// Serves scores from the content-addressed store, falling through to the
/// wrapped scorer on a miss and recording the answer. Identical pairs
/// therefore cost one backend call per corpus, ever.
pub struct CachedScorer {
    inner: Box<dyn PairScorer>,
    store: Store,
}

impl CachedScorer {
    pub fn new(inner: Box<dyn PairScorer>, store: Store) -> CachedScorer {
        CachedScorer { inner, store }
    }
}

impl PairScorer for CachedScorer {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn score(&self, source: &str, generated: &str) -> Result<f64, ScorerError> {
        let key = score_key(self.inner.name(), source, generated);
        let cached = self.store.get::<f64>(NS_SCORES, &key).map_err(|err| ScorerError::Failed {
            name: self.inner.name().to_string(),
            message: format!("score cache read: {err}"),
        })?;
        if let Some(value) = cached {
            return check_range(self.inner.name(), value);
        }
        let value = self.inner.score(source, generated)?;
        self.store.put(NS_SCORES, &key, &value).map_err(|err| ScorerError::Failed {
            name: self.inner.name().to_string(),
            message: format!("score cache write: {err}"),
        })?;
        Ok(value)
    }
}

/// Cache-only scorer for replay runs: a miss is an error, because replay
/// promises to repeat a recorded run without new backend calls.
pub struct ReplayScorer {
    name: String,
    store: Store,
}

impl ReplayScorer {
    /// `name` must match the scorer that recorded the cache.
    pub fn new(name: impl Into<String>, store: Store) -> ReplayScorer {
        ReplayScorer { name: name.into(), store }
    }
}

impl PairScorer for ReplayScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, source: &str, generated: &str) -> Result<f64, ScorerError> {
        let key = score_key(&self.name, source, generated);
        let cached = self.store.get::<f64>(NS_SCORES, &key).map_err(|err| ScorerError::Failed {
            name: self.name.clone(),
            message: format!("score cache read: {err}"),
        })?;
        match cached {
            Some(value) => check_range(&self.name, value),
            None => Err(ScorerError::Failed {
                name: self.name.clone(),
                message: "replay cache has no score for this pair; re-run live to record it".to_string(),
            }),
        }
    }
}

/// Score a batch of pairs, fanning out across threads when the `parallel`
/// feature is on. Output order always matches input order.
pub fn score_pairs(
    scorer: &dyn PairScorer,
    pairs: &[(String, String)],
) -> Vec<Result<f64, ScorerError>> {
    exec::map_ordered(pairs, |(source, generated)| scorer.score(source, generated))
}
