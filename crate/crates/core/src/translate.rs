//! Translation client used by back-translation: pluggable backends, a
//! persistent cache, retry with exponential backoff, and offline stub
//! backends for tests.

use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Source language code of the corpus.
pub const SOURCE_LANG: &str = "id";

/// Intermediate language of a back-translation round trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotLanguage {
    English,
    Arabic,
}

impl PivotLanguage {
    pub fn code(&self) -> &'static str {
        match self {
            PivotLanguage::English => "en",
            PivotLanguage::Arabic => "ar",
        }
    }

    pub fn parse(value: &str) -> Option<PivotLanguage> {
        match value.trim().to_lowercase().as_str() {
            "en" | "english" => Some(PivotLanguage::English),
            "ar" | "arabic" => Some(PivotLanguage::Arabic),
            _ => None,
        }
    }
}

impl fmt::Display for PivotLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Behavioral contract for translators. Within one run, the same
/// `(backend_id, text, source, target)` must yield a stable response so the
/// result is cacheable.
pub trait TranslationBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, TranslateError>;
}

/// Which half of a round trip failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundTripLeg {
    Outbound,
    Return,
}

impl fmt::Display for RoundTripLeg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoundTripLeg::Outbound => f.write_str("outbound"),
            RoundTripLeg::Return => f.write_str("return"),
        }
    }
}

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("source and target language are both {lang:?}")]
    SameLanguage { lang: String },
    #[error("refusing to translate empty text")]
    EmptyText,
    #[error("backend {backend_id} returned an empty translation for {text_key}")]
    EmptyResponse {
        backend_id: String,
        text_key: String,
    },
    #[error("translation of {text_key} failed after {attempts} attempts: {message}")]
    Transport {
        text_key: String,
        attempts: u32,
        message: String,
    },
    #[error("backend error: {message}")]
    Backend { message: String },
    #[error("{leg} leg failed: {source}")]
    Leg {
        leg: RoundTripLeg,
        #[source]
        source: Box<TranslateError>,
    },
    #[error("cache file {path}: {source}")]
    CacheIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cache file {path} line {line} is not a key/value entry")]
    CacheFormat { path: String, line: usize },
    #[error("dictionary file {path}: {message}")]
    Dictionary { path: String, message: String },
}

/// Retry schedule: exponential backoff starting at `base_delay`, doubling per
/// retry, capped at `max_delay`. Delays are monotonically non-decreasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(200),
            max_delay: Duration::from_secs(5),
        }
    }
}

impl RetryPolicy {
    /// Policy with no delays, for stub backends in tests.
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts: max_attempts.max(1),
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    /// Delay to sleep before the given attempt (1-based). The first attempt
    /// has no delay.
    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt <= 1 {
            return Duration::ZERO;
        }
        let factor = 1u32 << (attempt - 2).min(20);
        self.base_delay
            .saturating_mul(factor)
            .min(self.max_delay.max(self.base_delay))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

#[derive(Serialize, Deserialize)]
struct CacheLine<'a> {
    key: &'a str,
    value: &'a str,
}

struct CacheInner {
    map: HashMap<String, String>,
    writer: Option<BufWriter<File>>,
}

/// Persistent map from `(backend_id, source, target, text-hash)` to the
/// translated text. Entries are appended to a JSON-lines file as they are
/// inserted, so the cache survives process restarts and interrupted runs
/// lose at most the in-flight entry.
pub struct TranslationCache {
    path: Option<PathBuf>,
    inner: Mutex<CacheInner>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl TranslationCache {
    /// Opens (or creates) a cache file, loading all existing entries.
    pub fn open(path: &Path) -> Result<Self, TranslateError> {
        let mut map = HashMap::new();
        if path.exists() {
            let content =
                std::fs::read_to_string(path).map_err(|source| TranslateError::CacheIo {
                    path: path.display().to_string(),
                    source,
                })?;
            for (idx, line) in content.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheLine =
                    serde_json::from_str(line).map_err(|_| TranslateError::CacheFormat {
                        path: path.display().to_string(),
                        line: idx + 1,
                    })?;
                map.insert(entry.key.to_string(), entry.value.to_string());
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| TranslateError::CacheIo {
                path: path.display().to_string(),
                source,
            })?;
        Ok(TranslationCache {
            path: Some(path.to_path_buf()),
            inner: Mutex::new(CacheInner {
                map,
                writer: Some(BufWriter::new(file)),
            }),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    /// Volatile cache with no backing file.
    pub fn in_memory() -> Self {
        TranslationCache {
            path: None,
            inner: Mutex::new(CacheInner {
                map: HashMap::new(),
                writer: None,
            }),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Cache key for one translation request.
    pub fn key(backend_id: &str, source: &str, target: &str, text: &str) -> String {
        format!("{backend_id}|{source}|{target}|{}", text_hash(text))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let inner = self.inner.lock().expect("cache lock");
        match inner.map.get(key) {
            Some(value) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(value.clone())
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    pub fn put(&self, key: &str, value: &str) -> Result<(), TranslateError> {
        let mut inner = self.inner.lock().expect("cache lock");
        inner.map.insert(key.to_string(), value.to_string());
        if let Some(writer) = inner.writer.as_mut() {
            let line = serde_json::to_string(&CacheLine { key, value }).expect("cache line");
            let path = self
                .path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default();
            writeln!(writer, "{line}").map_err(|source| TranslateError::CacheIo {
                path: path.clone(),
                source,
            })?;
            writer
                .flush()
                .map_err(|source| TranslateError::CacheIo { path, source })?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }
}

fn text_hash(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Translates one text, consulting the cache first and retrying transport
/// failures with exponential backoff up to `policy.max_attempts`.
pub fn translate(
    text: &str,
    source: &str,
    target: &str,
    backend: &dyn TranslationBackend,
    cache: &TranslationCache,
    policy: &RetryPolicy,
) -> Result<String, TranslateError> {
    if source == target {
        return Err(TranslateError::SameLanguage {
            lang: source.to_string(),
        });
    }
    if text.trim().is_empty() {
        return Err(TranslateError::EmptyText);
    }
    let key = TranslationCache::key(backend.backend_id(), source, target, text);
    if let Some(cached) = cache.get(&key) {
        return Ok(cached);
    }

    let max_attempts = policy.max_attempts.max(1);
    let mut last_message = String::new();
    for attempt in 1..=max_attempts {
        let delay = policy.delay_before(attempt);
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
        match backend.translate(text, source, target) {
            Ok(translated) => {
                if translated.trim().is_empty() {
                    return Err(TranslateError::EmptyResponse {
                        backend_id: backend.backend_id().to_string(),
                        text_key: key,
                    });
                }
                cache.put(&key, &translated)?;
                return Ok(translated);
            }
            Err(TranslateError::Backend { message }) => {
                last_message = message;
            }
            Err(other) => return Err(other),
        }
    }
    Err(TranslateError::Transport {
        text_key: key,
        attempts: max_attempts,
        message: last_message,
    })
}

/// Round trip through a pivot language: `id -> pivot -> id`, each leg cached
/// independently. Errors are tagged with the failing leg.
pub fn round_trip(
    text: &str,
    pivot: PivotLanguage,
    backend: &dyn TranslationBackend,
    cache: &TranslationCache,
    policy: &RetryPolicy,
) -> Result<String, TranslateError> {
    let outbound =
        translate(text, SOURCE_LANG, pivot.code(), backend, cache, policy).map_err(|e| {
            TranslateError::Leg {
                leg: RoundTripLeg::Outbound,
                source: Box::new(e),
            }
        })?;
    translate(&outbound, pivot.code(), SOURCE_LANG, backend, cache, policy).map_err(|e| {
        TranslateError::Leg {
            leg: RoundTripLeg::Return,
            source: Box::new(e),
        }
    })
}

/// Translates a batch with up to `width` concurrent backend requests. Cache
/// writes stay serialized behind the cache's own lock and results are
/// returned in input order. On failure the error for the smallest input
/// index is reported.
pub fn translate_many(
    texts: &[String],
    source: &str,
    target: &str,
    backend: &dyn TranslationBackend,
    cache: &TranslationCache,
    policy: &RetryPolicy,
    width: usize,
) -> Result<Vec<String>, TranslateError> {
    let width = width.max(1).min(texts.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<String, TranslateError>>>> =
        Mutex::new((0..texts.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..width {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= texts.len() {
                    break;
                }
                let outcome = translate(&texts[idx], source, target, backend, cache, policy);
                results.lock().expect("result lock")[idx] = Some(outcome);
            });
        }
    });

    let mut out = Vec::with_capacity(texts.len());
    for slot in results.into_inner().expect("result lock") {
        out.push(slot.expect("every index visited")?);
    }
    Ok(out)
}

/// Token-table stub backend. Each whitespace token is mapped through the
/// table for the requested language pair; unknown tokens pass through
/// unchanged. Tables load from two-column UTF-8 files (`source<TAB>target`).
pub struct DictionaryBackend {
    backend_id: String,
    tables: HashMap<(String, String), HashMap<String, String>>,
}

impl DictionaryBackend {
    pub fn new(backend_id: impl Into<String>) -> Self {
        DictionaryBackend {
            backend_id: backend_id.into(),
            tables: HashMap::new(),
        }
    }

    pub fn with_entries<I, S>(mut self, source: &str, target: &str, entries: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let table = self
            .tables
            .entry((source.to_string(), target.to_string()))
            .or_default();
        for (from, to) in entries {
            table.insert(from.into(), to.into());
        }
        self
    }

    /// Loads a two-column file (tab-separated) into the table for one
    /// direction. `#` comment lines and blank lines are ignored.
    pub fn load_table(
        &mut self,
        path: &Path,
        source: &str,
        target: &str,
    ) -> Result<(), TranslateError> {
        let content =
            std::fs::read_to_string(path).map_err(|source_err| TranslateError::Dictionary {
                path: path.display().to_string(),
                message: source_err.to_string(),
            })?;
        let table = self
            .tables
            .entry((source.to_string(), target.to_string()))
            .or_default();
        for (idx, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let (Some(from), Some(to)) = (parts.next(), parts.next()) else {
                return Err(TranslateError::Dictionary {
                    path: path.display().to_string(),
                    message: format!("line {} is not two tab-separated columns", idx + 1),
                });
            };
            table.insert(from.trim().to_string(), to.trim().to_string());
        }
        Ok(())
    }
}

impl TranslationBackend for DictionaryBackend {
    fn backend_id(&self) -> &str {
        &self.backend_id
    }

    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, TranslateError> {
        let table = self
            .tables
            .get(&(source.to_string(), target.to_string()))
            .ok_or_else(|| TranslateError::Backend {
                message: format!("no dictionary loaded for {source}->{target}"),
            })?;
        let translated: Vec<&str> = text
            .split_whitespace()
            .map(|token| table.get(token).map(String::as_str).unwrap_or(token))
            .collect();
        Ok(translated.join(" "))
    }
}

/// Identity backend: returns the input unchanged. Round trips through it are
/// degenerate by construction; callers must handle that.
pub struct EchoBackend;

impl TranslationBackend for EchoBackend {
    fn backend_id(&self) -> &str {
        "echo"
    }

    fn translate(
        &self,
        text: &str,
        _source: &str,
        _target: &str,
    ) -> Result<String, TranslateError> {
        Ok(text.to_string())
    }
}

/// Wrapper that counts delegated backend calls; used to verify that cache
/// hits bypass the backend.
pub struct CountingBackend<B> {
    inner: B,
    calls: AtomicU64,
}

impl<B: TranslationBackend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        CountingBackend {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<B: TranslationBackend> TranslationBackend for CountingBackend<B> {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, TranslateError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.translate(text, source, target)
    }
}

/// Settings for [`HttpBackend`]. The endpoint speaks the common JSON shape
/// `{"q", "source", "target"}` -> `{"translatedText"}`; an API key is read
/// from the environment variable named in `api_key_env` when set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    pub api_key_env: Option<String>,
    pub timeout: Duration,
    pub backend_id: String,
}

/// Translation backend over HTTP.
pub struct HttpBackend {
    config: HttpBackendConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build();
        HttpBackend {
            agent: agent_config.into(),
            config,
        }
    }
}

impl TranslationBackend for HttpBackend {
    fn backend_id(&self) -> &str {
        &self.config.backend_id
    }

    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, TranslateError> {
        let mut payload = serde_json::json!({
            "q": text,
            "source": source,
            "target": target,
            "format": "text",
        });
        if let Some(env_name) = &self.config.api_key_env {
            if let Ok(key) = std::env::var(env_name) {
                payload["api_key"] = serde_json::Value::String(key);
            }
        }
        let body = payload.to_string();
        let mut response = self
            .agent
            .post(&self.config.endpoint)
            .header("content-type", "application/json")
            .send(body.as_str())
            .map_err(|e| TranslateError::Backend {
                message: e.to_string(),
            })?;
        let raw = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TranslateError::Backend {
                message: e.to_string(),
            })?;
        let value: serde_json::Value =
            serde_json::from_str(&raw).map_err(|e| TranslateError::Backend {
                message: format!("invalid response body: {e}"),
            })?;
        value
            .get("translatedText")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| TranslateError::Backend {
                message: "response has no translatedText field".to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct FailingBackend;

    impl TranslationBackend for FailingBackend {
        fn backend_id(&self) -> &str {
            "failing"
        }

        fn translate(&self, _: &str, _: &str, _: &str) -> Result<String, TranslateError> {
            Err(TranslateError::Backend {
                message: "unreachable".to_string(),
            })
        }
    }

    fn id_en_backend() -> DictionaryBackend {
        DictionaryBackend::new("dict-test")
            .with_entries("id", "en", [("senang", "happy")])
            .with_entries("en", "id", [("happy", "gembira")])
    }

    #[test]
    fn dictionary_stub_translates_known_tokens() {
        let backend = id_en_backend();
        let cache = TranslationCache::in_memory();
        let out = translate(
            "senang",
            "id",
            "en",
            &backend,
            &cache,
            &RetryPolicy::immediate(1),
        )
        .unwrap();
        assert_eq!(out, "happy");
    }

    #[test]
    fn second_identical_call_hits_cache_with_zero_backend_calls() {
        let backend = CountingBackend::new(id_en_backend());
        let cache = TranslationCache::in_memory();
        let policy = RetryPolicy::immediate(1);
        let first = translate("senang", "id", "en", &backend, &cache, &policy).unwrap();
        assert_eq!(backend.calls(), 1);
        let second = translate("senang", "id", "en", &backend, &cache, &policy).unwrap();
        assert_eq!(first, second);
        assert_eq!(backend.calls(), 1);
        assert_eq!(cache.stats().hits, 1);
    }

    #[test]
    fn failing_backend_errors_after_attempt_limit() {
        let backend = CountingBackend::new(FailingBackend);
        let cache = TranslationCache::in_memory();
        let err = translate(
            "senang",
            "id",
            "en",
            &backend,
            &cache,
            &RetryPolicy::immediate(4),
        )
        .unwrap_err();
        match err {
            TranslateError::Transport { attempts, .. } => assert_eq!(attempts, 4),
            other => panic!("unexpected error: {other}"),
        }
        assert_eq!(backend.calls(), 4);
    }

    #[test]
    fn same_language_and_empty_text_are_rejected() {
        let backend = EchoBackend;
        let cache = TranslationCache::in_memory();
        let policy = RetryPolicy::immediate(1);
        assert!(matches!(
            translate("halo", "id", "id", &backend, &cache, &policy),
            Err(TranslateError::SameLanguage { .. })
        ));
        assert!(matches!(
            translate("  ", "id", "en", &backend, &cache, &policy),
            Err(TranslateError::EmptyText)
        ));
    }

    #[test]
    fn empty_backend_response_is_an_error() {
        struct BlankBackend;
        impl TranslationBackend for BlankBackend {
            fn backend_id(&self) -> &str {
                "blank"
            }
            fn translate(&self, _: &str, _: &str, _: &str) -> Result<String, TranslateError> {
                Ok("  ".to_string())
            }
        }
        let cache = TranslationCache::in_memory();
        let err = translate(
            "halo",
            "id",
            "en",
            &BlankBackend,
            &cache,
            &RetryPolicy::immediate(2),
        )
        .unwrap_err();
        assert!(matches!(err, TranslateError::EmptyResponse { .. }));
    }

    #[test]
    fn echo_round_trip_returns_original() {
        let cache = TranslationCache::in_memory();
        let out = round_trip(
            "barang bagus",
            PivotLanguage::English,
            &EchoBackend,
            &cache,
            &RetryPolicy::immediate(1),
        )
        .unwrap();
        assert_eq!(out, "barang bagus");
    }

    #[test]
    fn asymmetric_stub_round_trip_paraphrases() {
        let cache = TranslationCache::in_memory();
        let out = round_trip(
            "senang",
            PivotLanguage::English,
            &id_en_backend(),
            &cache,
            &RetryPolicy::immediate(1),
        )
        .unwrap();
        assert_eq!(out, "gembira");
    }

    #[test]
    fn arabic_pivot_uses_its_own_tables() {
        let backend = id_en_backend()
            .with_entries("id", "ar", [("senang", "said")])
            .with_entries("ar", "id", [("said", "bahagia")]);
        let cache = TranslationCache::in_memory();
        let policy = RetryPolicy::immediate(1);
        let via_en =
            round_trip("senang", PivotLanguage::English, &backend, &cache, &policy).unwrap();
        let via_ar =
            round_trip("senang", PivotLanguage::Arabic, &backend, &cache, &policy).unwrap();
        assert_eq!(via_ar, "bahagia");
        assert_ne!(via_en, via_ar);
    }

    #[test]
    fn round_trip_tags_the_failing_leg() {
        // Outbound id->en works, return en->id has no table.
        let backend = DictionaryBackend::new("half").with_entries("id", "en", [("a", "b")]);
        let cache = TranslationCache::in_memory();
        let err = round_trip(
            "a",
            PivotLanguage::English,
            &backend,
            &cache,
            &RetryPolicy::immediate(1),
        )
        .unwrap_err();
        match err {
            TranslateError::Leg { leg, .. } => assert_eq!(leg, RoundTripLeg::Return),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn cache_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cache = TranslationCache::open(&path).unwrap();
            let backend = id_en_backend();
            translate(
                "senang",
                "id",
                "en",
                &backend,
                &cache,
                &RetryPolicy::immediate(1),
            )
            .unwrap();
        }
        let cache = TranslationCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        let backend = CountingBackend::new(id_en_backend());
        let out = translate(
            "senang",
            "id",
            "en",
            &backend,
            &cache,
            &RetryPolicy::immediate(1),
        )
        .unwrap();
        assert_eq!(out, "happy");
        assert_eq!(backend.calls(), 0);
    }

    #[test]
    fn replaying_a_sequence_makes_zero_backend_calls() {
        let backend = CountingBackend::new(id_en_backend().with_entries(
            "id",
            "en",
            [("barang", "goods"), ("bagus", "nice")],
        ));
        let cache = TranslationCache::in_memory();
        let policy = RetryPolicy::immediate(1);
        let sequence = ["senang", "barang bagus", "senang", "bagus"];
        for text in sequence {
            translate(text, "id", "en", &backend, &cache, &policy).unwrap();
        }
        let calls_after_first_pass = backend.calls();
        for text in sequence {
            translate(text, "id", "en", &backend, &cache, &policy).unwrap();
        }
        assert_eq!(backend.calls(), calls_after_first_pass);
    }

    #[test]
    fn backoff_delays_are_monotonically_non_decreasing_and_capped() {
        let policy = RetryPolicy {
            max_attempts: 8,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(900),
        };
        let delays: Vec<Duration> = (1..=8).map(|a| policy.delay_before(a)).collect();
        assert_eq!(delays[0], Duration::ZERO);
        for pair in delays.windows(2) {
            assert!(pair[0] <= pair[1]);
        }
        assert_eq!(delays[1], Duration::from_millis(100));
        assert_eq!(delays[2], Duration::from_millis(200));
        assert!(delays.iter().all(|d| *d <= Duration::from_millis(900)));
    }

    #[test]
    fn translate_many_preserves_input_order() {
        let backend = id_en_backend().with_entries(
            "id",
            "en",
            [("satu", "one"), ("dua", "two"), ("tiga", "three")],
        );
        let cache = TranslationCache::in_memory();
        let texts: Vec<String> = ["satu", "dua", "tiga", "senang"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let out = translate_many(
            &texts,
            "id",
            "en",
            &backend,
            &cache,
            &RetryPolicy::immediate(1),
            4,
        )
        .unwrap();
        assert_eq!(out, ["one", "two", "three", "happy"]);
    }

    #[test]
    fn http_backend_round_trips_against_local_server() {
        use std::io::{Read, Write};
        use std::net::TcpListener;

        fn read_request(stream: &mut std::net::TcpStream) -> String {
            let mut data = Vec::new();
            let mut buf = [0u8; 1024];
            loop {
                let n = stream.read(&mut buf).unwrap();
                if n == 0 {
                    break;
                }
                data.extend_from_slice(&buf[..n]);
                let text = String::from_utf8_lossy(&data).to_string();
                if let Some(header_end) = text.find("\r\n\r\n") {
                    let content_length = text
                        .lines()
                        .find_map(|l| {
                            l.to_lowercase()
                                .strip_prefix("content-length:")
                                .map(str::trim)
                                .map(String::from)
                        })
                        .and_then(|v| v.parse::<usize>().ok())
                        .unwrap_or(0);
                    if data.len() >= header_end + 4 + content_length {
                        break;
                    }
                }
            }
            String::from_utf8_lossy(&data).to_string()
        }

        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            // First request: fail with 500 to exercise the retry path.
            for (i, stream) in listener.incoming().take(2).enumerate() {
                let mut stream = stream.unwrap();
                let request = read_request(&mut stream);
                if i == 0 {
                    stream
                        .write_all(
                            b"HTTP/1.1 500 Internal Server Error\r\ncontent-length: 0\r\n\r\n",
                        )
                        .unwrap();
                    continue;
                }
                assert!(request.contains("\"q\":\"senang\""), "request: {request}");
                let body = r#"{"translatedText":"happy"}"#;
                let response = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{}",
                    body.len(),
                    body
                );
                stream.write_all(response.as_bytes()).unwrap();
            }
        });

        let backend = HttpBackend::new(HttpBackendConfig {
            endpoint: format!("http://{addr}/translate"),
            api_key_env: None,
            timeout: Duration::from_secs(5),
            backend_id: "http-test".to_string(),
        });
        let cache = TranslationCache::in_memory();
        let out = translate(
            "senang",
            "id",
            "en",
            &backend,
            &cache,
            &RetryPolicy::immediate(3),
        )
        .unwrap();
        assert_eq!(out, "happy");
        server.join().unwrap();
    }
}
