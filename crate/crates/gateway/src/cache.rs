//! Content-addressed JSON store shared by completions, embeddings, and scores.
//!
//! Every entry lives at `<root>/<namespace>/<key>.json`, where the key is a
//! sha256 over the request's canonical identity. Identical requests therefore
//! land on identical files, across runs and across processes.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use f3_core::hashing::{canonical_f64, sha256_fields};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::config::GenerationParams;

pub const NS_COMPLETIONS: &str = "completions";
pub const NS_EMBEDDINGS: &str = "embeddings";
pub const NS_SCORES: &str = "scores";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cache io under {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cache entry {path} is not valid JSON: {source}")]
    Corrupt {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Cache identity of a completion request. Floats are canonicalized to
/// their shortest round-trip form so `0.95` hashes the same however it
/// was parsed; absent optional parameters hash as empty fields, which the
/// length-prefixed digest keeps distinct from any present value.
pub fn completion_key(
    provider_id: &str,
    model: &str,
    params: &GenerationParams,
    prompt: &str,
) -> String {
    let temperature = canonical_f64(params.temperature);
    let top_p = params.top_p.map(canonical_f64).unwrap_or_default();
    let top_k = params.top_k.map(|v| v.to_string()).unwrap_or_default();
    let max_tokens = params.max_tokens.to_string();
    let candidates = params.candidate_count.to_string();
    sha256_fields(&[
        "completion",
        provider_id,
        model,
        &temperature,
        &top_p,
        &top_k,
        &max_tokens,
        &candidates,
        prompt,
    ])
}

/// Cache identity of an embedding request.
pub fn embedding_key(provider_id: &str, model: &str, text: &str) -> String {
    sha256_fields(&["embedding", provider_id, model, text])
}

/// Cache identity of an external scorer invocation.
pub fn score_key(scorer: &str, premise: &str, hypothesis: &str) -> String {
    sha256_fields(&["score", scorer, premise, hypothesis])
}

/// File-backed JSON store. Cheap to clone paths from; all methods take
/// `&self`, writes are atomic (temp file + rename).
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| StoreError::Io { path: root.clone(), source })?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_path(&self, namespace: &str, key: &str) -> PathBuf {
        self.root.join(namespace).join(format!("{key}.json"))
    }

    pub fn get<T: DeserializeOwned>(
        &self,
        namespace: &str,
        key: &str,
    ) -> Result<Option<T>, StoreError> {
        let path = self.entry_path(namespace, key);
        let bytes = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(StoreError::Io { path, source }),
        };
        serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|source| StoreError::Corrupt { path, source })
    }

    pub fn put<T: Serialize>(
        &self,
        namespace: &str,
        key: &str,
        value: &T,
    ) -> Result<(), StoreError> {
        let path = self.entry_path(namespace, key);
        let dir = path.parent().expect("entry path has a parent");
        fs::create_dir_all(dir).map_err(|source| StoreError::Io { path: dir.to_path_buf(), source })?;
        let json = serde_json::to_vec_pretty(value).expect("cache values serialize");
        // Unique temp name per write: concurrent writers of the same key
        // must not interleave bytes in a shared scratch file.
        static WRITE_SEQ: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
        let seq = WRITE_SEQ.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let tmp = path.with_extension(format!("tmp{}-{seq}", std::process::id()));
        let mut file =
            fs::File::create(&tmp).map_err(|source| StoreError::Io { path: tmp.clone(), source })?;
        file.write_all(&json)
            .and_then(|_| file.sync_all())
            .map_err(|source| StoreError::Io { path: tmp.clone(), source })?;
        drop(file);
        fs::rename(&tmp, &path).map_err(|source| StoreError::Io { path, source })
    }

    /// Number of entries in a namespace (0 if it does not exist yet).
    pub fn count(&self, namespace: &str) -> Result<usize, StoreError> {
        let dir = self.root.join(namespace);
        let entries = match fs::read_dir(&dir) {
            Ok(entries) => entries,
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => return Ok(0),
            Err(source) => return Err(StoreError::Io { path: dir, source }),
        };
        let mut count = 0;
        for entry in entries {
            let entry = entry.map_err(|source| StoreError::Io { path: dir.clone(), source })?;
            if entry.path().extension().is_some_and(|ext| ext == "json") {
                count += 1;
            }
        }
        Ok(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_values_by_key() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let key = completion_key("p", "m", &GenerationParams::default(), "hello");
        assert!(store.get::<String>(NS_COMPLETIONS, &key).unwrap().is_none());
        store.put(NS_COMPLETIONS, &key, &"answer".to_string()).unwrap();
        assert_eq!(
            store.get::<String>(NS_COMPLETIONS, &key).unwrap().as_deref(),
            Some("answer")
        );
        assert_eq!(store.count(NS_COMPLETIONS).unwrap(), 1);
        assert_eq!(store.count(NS_EMBEDDINGS).unwrap(), 0);
    }

    #[test]
    fn keys_separate_every_identity_field() {
        let params = GenerationParams::default();
        let base = completion_key("p", "m", &params, "q");
        assert_eq!(base, completion_key("p", "m", &params, "q"));
        assert_ne!(base, completion_key("p2", "m", &params, "q"));
        assert_ne!(base, completion_key("p", "m2", &params, "q"));
        assert_ne!(base, completion_key("p", "m", &params, "q2"));
        let mut hotter = params.clone();
        hotter.temperature = 0.7;
        assert_ne!(base, completion_key("p", "m", &hotter, "q"));
        let mut no_top_p = params.clone();
        no_top_p.top_p = None;
        assert_ne!(base, completion_key("p", "m", &no_top_p, "q"));
        let mut fewer = params;
        fewer.max_tokens = 256;
        assert_ne!(base, completion_key("p", "m", &fewer, "q"));
    }

    #[test]
    fn namespaces_do_not_collide() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.put(NS_COMPLETIONS, "k", &1u32).unwrap();
        store.put(NS_EMBEDDINGS, "k", &2u32).unwrap();
        assert_eq!(store.get::<u32>(NS_COMPLETIONS, "k").unwrap(), Some(1));
        assert_eq!(store.get::<u32>(NS_EMBEDDINGS, "k").unwrap(), Some(2));
    }

    #[test]
    fn corrupt_entries_surface_their_path() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let path = dir.path().join(NS_SCORES).join("bad.json");
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, b"{ not json").unwrap();
        match store.get::<u32>(NS_SCORES, "bad") {
            Err(StoreError::Corrupt { path: reported, .. }) => assert_eq!(reported, path),
            other => panic!("expected corrupt error, got {other:?}"),
        }
    }
}
