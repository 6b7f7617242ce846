//! Chat-completion backends: request/response types, retries, caching and
//! a bounded-concurrency handle shared by workers.

mod cache;
mod mock;
mod openai;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::Stage;
pub use cache::{cache_key, ResponseCache};
pub use mock::{MockEntry, MockProvider, MockReply, MockScript};
pub use openai::{OpenAiConfig, OpenAiProvider};

/// Identifies one logical model call.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RequestTag {
    pub task_id: String,
    pub stage: Stage,
    pub sample_index: u32,
    pub run_index: u32,
    /// Re-prompt number within the stage.
    #[serde(default)]
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: Option<u32>,
    pub max_output_tokens: Option<u32>,
    pub tag: RequestTag,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(BackendError::InvalidRequest(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub model: String,
    pub latency_ms: u64,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("malformed provider response: {message}")]
    Malformed { message: String, raw: String },
    #[error("no script entry matches {0}")]
    NoScriptEntry(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no backend registered for model '{0}'")]
    UnknownModel(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    pub fn retryable(&self) -> bool {
        matches!(self, BackendError::RateLimited(_) | BackendError::Transient(_))
    }
}

/// Anything that can answer a single chat-completion request.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, req: &GenerationRequest) -> Result<GenerationResult, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Extra attempts after the first call.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, base_delay: Duration::from_millis(500), max_delay: Duration::from_secs(30) }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        RetryPolicy { max_retries, base_delay: Duration::ZERO, max_delay: Duration::ZERO }
    }

    /// Delay before retry number `n` (1-based): base * 2^(n-1), capped.
    pub fn delay(&self, n: u32) -> Duration {
        let factor = 1u32.checked_shl(n.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// A provider plus retry, cache and concurrency limit. Safe to share.
pub struct BackendHandle {
    provider: Arc<dyn ChatProvider>,
    retry: RetryPolicy,
    cache: Option<Arc<ResponseCache>>,
    limit: Semaphore,
    calls: AtomicU64,
}

impl BackendHandle {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        BackendHandle { provider, retry: RetryPolicy::default(), cache: None, limit: Semaphore::new(4), calls: AtomicU64::new(0) }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_max_concurrency(mut self, n: usize) -> Self {
        self.limit = Semaphore::new(n);
        self
    }

    /// Provider calls made so far, including failed ones.
    pub fn provider_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        req.validate()?;
        let key = self.cache.as_ref().map(|_| cache_key(req));
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(mut hit) = cache.get(key) {
                hit.cached = true;
                return Ok(hit);
            }
        }
        let _permit = self.limit.acquire();
        let mut attempt = 0;
        let result = loop {
            self.calls.fetch_add(1, Ordering::Relaxed);
            let started = Instant::now();
            match self.provider.complete(req) {
                Ok(mut r) => {
                    if r.latency_ms == 0 {
                        r.latency_ms = started.elapsed().as_millis() as u64;
                    }
                    r.cached = false;
                    break r;
                }
                Err(e) if e.retryable() && attempt < self.retry.max_retries => {
                    attempt += 1;
                    log::warn!("{} {} sample {}: {e}; retry {attempt}", req.tag.task_id, req.tag.stage, req.tag.sample_index);
                    std::thread::sleep(self.retry.delay(attempt));
                }
                Err(e) => return Err(e),
            }
        };
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            cache.put(key, req, &result);
        }
        Ok(result)
    }
}

/// Model id to backend. An optional fallback serves every unlisted model.
#[derive(Default, Clone)]
pub struct Backends {
    handles: BTreeMap<String, Arc<BackendHandle>>,
    fallback: Option<Arc<BackendHandle>>,
}

impl Backends {
    pub fn new() -> Self {
        Backends::default()
    }

    /// Every model served by `h`.
    pub fn single(h: Arc<BackendHandle>) -> Self {
        Backends { handles: BTreeMap::new(), fallback: Some(h) }
    }

    pub fn register(&mut self, model: &str, h: Arc<BackendHandle>) {
        self.handles.insert(model.to_string(), h);
    }

    pub fn get(&self, model: &str) -> Result<&BackendHandle, BackendError> {
        self.handles.get(model).or(self.fallback.as_ref()).map(|h| h.as_ref()).ok_or_else(|| BackendError::UnknownModel(model.to_string()))
    }
}

/// Whitespace-delimited token count used by the mock provider.
pub fn whitespace_tokens(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}
