//! Chat-completion and embedding access.
//!
//! [`Gateway`] wraps a [`Backend`] (live OpenAI-compatible HTTP, or one of the
//! offline mocks) with retries, a bound on in-flight requests and an
//! append-only usage ledger.

mod cost;
pub mod mock;
pub mod openai;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cost::{estimate_cost, estimate_cost_nanos, CostError, ModelPrice, PriceTable};

pub const DEFAULT_EMBEDDING_MODEL: &str = "text-embedding-3-small";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_id: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// `stage/unit`, e.g. `question_gen/doc17`. Keys the ledger and mock scripts.
    pub request_tag: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
    pub latency_ms: u64,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendReply {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransientKind {
    RateLimit,
    Server,
    Transport,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("transient {kind:?} failure: {message}")]
    Transient { kind: TransientKind, message: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("content filter rejected the request: {0}")]
    ContentFilter(String),
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("[{tag}] authentication failed: {message}")]
    Auth { tag: String, message: String },
    #[error("[{tag}] content filter rejection: {message}")]
    ContentFilter { tag: String, message: String },
    #[error("[{tag}] gave up after {retries} retries: {last}")]
    RetriesExhausted { tag: String, retries: u32, last: String },
    #[error("[{tag}] backend error: {message}")]
    Backend { tag: String, message: String },
    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, BackendError>;
    /// One vector per input text, positionally aligned.
    fn embed(&self, model_id: &str, texts: &[String]) -> Result<(Vec<Vec<f64>>, Usage), BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 5, base_delay_ms: 1_000, max_delay_ms: 60_000, jitter: true }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; for mocks and tests.
    pub fn immediate(max_retries: u32) -> Self {
        Self { max_retries, base_delay_ms: 0, max_delay_ms: 0, jitter: false }
    }

    /// Delay before retry number `retry` (0-based): `base * 2^retry`, capped,
    /// then scaled into `[0.5, 1.0)` of itself when jitter is on.
    pub fn delay(&self, retry: u32) -> Duration {
        let exp = self.base_delay_ms.saturating_mul(1u64 << retry.min(32));
        let capped = exp.min(self.max_delay_ms);
        let ms = if self.jitter && capped > 0 {
            let f: f64 = rand::thread_rng().gen_range(0.5..1.0);
            (capped as f64 * f) as u64
        } else {
            capped
        };
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub ts: u64,
    pub request_tag: String,
    pub model_id: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub temperature: Option<f64>,
}

/// Source of ledger timestamps (unix milliseconds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    System,
    /// Constant timestamp, so mock runs write byte-identical ledgers.
    Fixed(u64),
}

impl Clock {
    fn now_ms(self) -> u64 {
        match self {
            Clock::System => SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64),
            Clock::Fixed(ts) => ts,
        }
    }
}

struct Limiter {
    max: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(max: usize) -> Self {
        Self { max: max.max(1), in_flight: Mutex::new(0), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("limiter lock");
        while *n >= self.max {
            n = self.freed.wait(n).expect("limiter lock");
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("limiter lock") -= 1;
        self.0.freed.notify_one();
    }
}

/// Shareable across threads; every successful call is appended to the ledger.
pub struct Gateway {
    backend: Arc<dyn Backend>,
    retry: RetryPolicy,
    limiter: Limiter,
    clock: Clock,
    embedding_model: String,
    embedding_dim: OnceLock<usize>,
    ledger: Mutex<Vec<LedgerEntry>>,
    retries: AtomicU64,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Self {
            backend,
            retry: RetryPolicy::default(),
            limiter: Limiter::new(8),
            clock: Clock::System,
            embedding_model: DEFAULT_EMBEDDING_MODEL.to_string(),
            embedding_dim: OnceLock::new(),
            ledger: Mutex::new(Vec::new()),
            retries: AtomicU64::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_parallelism(mut self, max_in_flight: usize) -> Self {
        self.limiter = Limiter::new(max_in_flight);
        self
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_embedding_model(mut self, model: impl Into<String>) -> Self {
        self.embedding_model = model.into();
        self
    }

    pub fn parallelism(&self) -> usize {
        self.limiter.max
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    /// Total retries performed so far, across all calls.
    pub fn retry_count(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    fn with_retries<T>(
        &self,
        tag: &str,
        mut call: impl FnMut() -> Result<T, BackendError>,
    ) -> Result<T, GatewayError> {
        let mut retry = 0;
        loop {
            let outcome = {
                let _permit = self.limiter.acquire();
                call()
            };
            match outcome {
                Ok(v) => return Ok(v),
                Err(BackendError::Transient { kind, message }) => {
                    if retry >= self.retry.max_retries {
                        return Err(GatewayError::RetriesExhausted {
                            tag: tag.to_string(),
                            retries: retry,
                            last: format!("{kind:?}: {message}"),
                        });
                    }
                    log::debug!("[{tag}] transient {kind:?} ({message}); retry {}", retry + 1);
                    std::thread::sleep(self.retry.delay(retry));
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    retry += 1;
                }
                Err(BackendError::Auth(message)) => return Err(GatewayError::Auth { tag: tag.to_string(), message }),
                Err(BackendError::ContentFilter(message)) => {
                    return Err(GatewayError::ContentFilter { tag: tag.to_string(), message })
                }
                Err(BackendError::Fatal(message)) => {
                    return Err(GatewayError::Backend { tag: tag.to_string(), message })
                }
            }
        }
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<Completion, GatewayError> {
        if req.prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        if !(0.0..=1.0).contains(&req.temperature) {
            return Err(GatewayError::InvalidRequest(format!("temperature {} outside [0, 1]", req.temperature)));
        }
        let started = Instant::now();
        let reply = self.with_retries(&req.request_tag, || self.backend.complete(req))?;
        self.record(LedgerEntry {
            ts: self.clock.now_ms(),
            request_tag: req.request_tag.clone(),
            model_id: req.model_id.clone(),
            input_tokens: reply.usage.input_tokens,
            output_tokens: reply.usage.output_tokens,
            temperature: Some(req.temperature),
        });
        Ok(Completion {
            text: reply.text,
            usage: reply.usage,
            latency_ms: started.elapsed().as_millis() as u64,
            backend_id: self.backend.id().to_string(),
        })
    }

    /// Embed `texts` in one batch. The first successful batch fixes the
    /// dimension for the lifetime of the gateway.
    pub fn embed(&self, texts: &[String], request_tag: &str) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        if texts.iter().any(|t| t.is_empty()) {
            return Err(GatewayError::InvalidRequest("cannot embed an empty string".into()));
        }
        let (vectors, usage) = self.with_retries(request_tag, || self.backend.embed(&self.embedding_model, texts))?;
        if vectors.len() != texts.len() {
            return Err(GatewayError::Backend {
                tag: request_tag.to_string(),
                message: format!("{} vectors for {} texts", vectors.len(), texts.len()),
            });
        }
        let expected = *self.embedding_dim.get_or_init(|| vectors[0].len());
        for v in &vectors {
            if v.len() != expected {
                return Err(GatewayError::DimensionMismatch { expected, found: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(GatewayError::Backend {
                    tag: request_tag.to_string(),
                    message: "non-finite embedding entry".into(),
                });
            }
        }
        self.record(LedgerEntry {
            ts: self.clock.now_ms(),
            request_tag: request_tag.to_string(),
            model_id: self.embedding_model.clone(),
            input_tokens: usage.input_tokens,
            output_tokens: usage.output_tokens,
            temperature: None,
        });
        Ok(vectors
            .into_iter()
            .map(|values| EmbeddingVector { values, model_id: self.embedding_model.clone() })
            .collect())
    }

    fn record(&self, entry: LedgerEntry) {
        self.ledger.lock().expect("ledger lock").push(entry);
    }

    /// Entries in append order.
    pub fn ledger(&self) -> Vec<LedgerEntry> {
        self.ledger.lock().expect("ledger lock").clone()
    }

    /// Entries ordered by request tag (stable), independent of thread timing.
    pub fn ledger_sorted(&self) -> Vec<LedgerEntry> {
        let mut entries = self.ledger();
        entries.sort_by(|a, b| a.request_tag.cmp(&b.request_tag));
        entries
    }
}

/// Linear temperature schedule over `n_calls` generation calls: call `i` gets
/// `i / (n_calls - 1)`, so the first call is greedy (0) and the last is 1.
pub fn anneal_temperatures(n_calls: usize) -> Result<Vec<f64>, GatewayError> {
    match n_calls {
        0 => Err(GatewayError::InvalidRequest("annealing needs at least one call".into())),
        1 => Ok(vec![0.0]),
        n => Ok((0..n).map(|i| i as f64 / (n - 1) as f64).collect()),
    }
}

pub fn request_tag(stage: &str, unit: &str) -> String {
    format!("{stage}/{unit}")
}

/// Split `stage/unit` at the first slash.
pub fn split_tag(tag: &str) -> (&str, &str) {
    tag.split_once('/').unwrap_or((tag, ""))
}

/// Whitespace token count; the mocks' stand-in for a tokenizer.
pub fn whitespace_tokens(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    struct Flaky {
        failures: usize,
        calls: AtomicUsize,
        error: BackendError,
    }

    impl Backend for Flaky {
        fn id(&self) -> &str {
            "flaky"
        }
        fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                return Err(self.error.clone());
            }
            Ok(BackendReply { text: format!("ok:{}", req.prompt), usage: Usage { input_tokens: 1, output_tokens: 1 } })
        }
        fn embed(&self, _: &str, texts: &[String]) -> Result<(Vec<Vec<f64>>, Usage), BackendError> {
            Ok((texts.iter().map(|t| vec![t.len() as f64; (t.len() % 2) + 1]).collect(), Usage::default()))
        }
    }

    fn flaky(failures: usize, error: BackendError) -> Arc<Flaky> {
        Arc::new(Flaky { failures, calls: AtomicUsize::new(0), error })
    }

    fn req() -> CompletionRequest {
        CompletionRequest {
            model_id: "m".into(),
            prompt: "p".into(),
            temperature: 0.0,
            max_output_tokens: 16,
            request_tag: "question_gen/d1".into(),
        }
    }

    fn rate_limit() -> BackendError {
        BackendError::Transient { kind: TransientKind::RateLimit, message: "429".into() }
    }

    #[test]
    fn one_rate_limit_then_success() {
        let backend = flaky(1, rate_limit());
        let gw = Gateway::new(backend.clone()).with_retry(RetryPolicy::immediate(3));
        let out = gw.complete(&req()).unwrap();
        assert_eq!(out.text, "ok:p");
        assert_eq!(gw.retry_count(), 1);
        assert_eq!(gw.ledger().len(), 1);
    }

    #[test]
    fn persistent_failure_stops_after_exactly_the_cap() {
        let backend = flaky(usize::MAX, rate_limit());
        let gw = Gateway::new(backend.clone()).with_retry(RetryPolicy::immediate(3));
        match gw.complete(&req()) {
            Err(GatewayError::RetriesExhausted { retries: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(backend.calls.load(Ordering::SeqCst), 4);
        assert!(gw.ledger().is_empty());
    }

    #[test]
    fn auth_and_content_filter_are_not_retried() {
        let backend = flaky(usize::MAX, BackendError::Auth("bad key".into()));
        let gw = Gateway::new(backend.clone()).with_retry(RetryPolicy::immediate(3));
        assert!(matches!(gw.complete(&req()), Err(GatewayError::Auth { .. })));
        assert_eq!(backend.calls.load(Ordering::SeqCst), 1);

        let backend = flaky(usize::MAX, BackendError::ContentFilter("blocked".into()));
        let gw = Gateway::new(backend).with_retry(RetryPolicy::immediate(3));
        match gw.complete(&req()) {
            Err(GatewayError::ContentFilter { tag, .. }) => assert_eq!(tag, "question_gen/d1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn request_validation() {
        let gw = Gateway::new(flaky(0, rate_limit()));
        let mut r = req();
        r.temperature = 1.5;
        assert!(matches!(gw.complete(&r), Err(GatewayError::InvalidRequest(_))));
        r.temperature = 0.5;
        r.prompt = "  ".into();
        assert!(matches!(gw.complete(&r), Err(GatewayError::InvalidRequest(_))));
    }

    #[test]
    fn embedding_dimension_must_agree() {
        let gw = Gateway::new(flaky(0, rate_limit()));
        assert!(gw.embed(&[], "embed/x").unwrap().is_empty());
        assert!(gw.ledger().is_empty());
        match gw.embed(&["ab".into(), "abc".into()], "embed/x") {
            Err(GatewayError::DimensionMismatch { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn backoff_is_exponential_and_capped() {
        let p = RetryPolicy { max_retries: 5, base_delay_ms: 1000, max_delay_ms: 60_000, jitter: false };
        let delays: Vec<u64> = (0..8).map(|r| p.delay(r).as_millis() as u64).collect();
        assert_eq!(delays, [1000, 2000, 4000, 8000, 16000, 32000, 60000, 60000]);
        let j = RetryPolicy { jitter: true, ..p };
        for r in 0..8 {
            let d = j.delay(r).as_millis() as u64;
            assert!(d >= delays[r as usize] / 2 && d <= delays[r as usize]);
        }
    }

    #[test]
    fn annealing_schedule() {
        assert_eq!(anneal_temperatures(5).unwrap(), [0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(anneal_temperatures(1).unwrap(), [0.0]);
        assert_eq!(anneal_temperatures(2).unwrap(), [0.0, 1.0]);
        assert!(anneal_temperatures(0).is_err());
        for n in 2..200 {
            let t = anneal_temperatures(n).unwrap();
            assert!(t.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!((t[0], t[n - 1]), (0.0, 1.0));
        }
    }

    #[test]
    fn limiter_bounds_concurrency() {
        struct Slow {
            current: AtomicUsize,
            peak: AtomicUsize,
        }
        impl Backend for Slow {
            fn id(&self) -> &str {
                "slow"
            }
            fn complete(&self, _: &CompletionRequest) -> Result<BackendReply, BackendError> {
                let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(5));
                self.current.fetch_sub(1, Ordering::SeqCst);
                Ok(BackendReply { text: String::new(), usage: Usage::default() })
            }
            fn embed(&self, _: &str, _: &[String]) -> Result<(Vec<Vec<f64>>, Usage), BackendError> {
                unreachable!()
            }
        }
        let backend = Arc::new(Slow { current: AtomicUsize::new(0), peak: AtomicUsize::new(0) });
        let gw = Gateway::new(backend.clone()).with_parallelism(2);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| gw.complete(&req()).unwrap());
            }
        });
        assert!(backend.peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(gw.ledger().len(), 8);
    }
}
