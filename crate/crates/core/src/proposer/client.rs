//! Cached, retrying front end over a [`LanguageModel`], with cost accounting.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::backend::{LanguageModel, LmError, LmRequest, LmResponse, RequestContext};

/// Dollar prices per thousand tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelRates {
    pub input_per_1k: f64,
    pub output_per_1k: f64,
}

/// Per-model prices, matched by longest model-name prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable(pub BTreeMap<String, ModelRates>);

impl Default for RateTable {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        m.insert("gpt-4".to_owned(), ModelRates { input_per_1k: 0.03, output_per_1k: 0.06 });
        m.insert("gpt-3.5".to_owned(), ModelRates { input_per_1k: 0.0015, output_per_1k: 0.002 });
        RateTable(m)
    }
}

impl RateTable {
    pub fn rates_for(&self, model: &str) -> Option<ModelRates> {
        self.0.iter().filter(|(prefix, _)| model.starts_with(prefix.as_str())).max_by_key(|(p, _)| p.len()).map(|(_, r)| *r)
    }

    pub fn cost(&self, model: &str, prompt_tokens: u64, completion_tokens: u64) -> f64 {
        self.rates_for(model).map_or(0.0, |r| {
            prompt_tokens as f64 / 1000.0 * r.input_per_1k + completion_tokens as f64 / 1000.0 * r.output_per_1k
        })
    }
}

/// Language-model usage; only requests that missed the cache are counted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub api_calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Dollars, at the configured rates.
    pub estimated_cost: f64,
}

impl CostLedger {
    pub fn record(&mut self, model: &str, resp: &LmResponse, rates: &RateTable) {
        self.api_calls += 1;
        self.prompt_tokens += resp.prompt_tokens;
        self.completion_tokens += resp.completion_tokens;
        self.estimated_cost += rates.cost(model, resp.prompt_tokens, resp.completion_tokens);
    }

    pub fn absorb(&mut self, other: &CostLedger) {
        self.api_calls += other.api_calls;
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.estimated_cost += other.estimated_cost;
    }

    pub fn tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base_delay: Duration::from_millis(500), max_delay: Duration::from_secs(30) }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1 << attempt.min(16)).min(self.max_delay)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    model: String,
    prompt: String,
    temperature: f64,
    sample_index: u64,
    response: LmResponse,
}

/// One JSON file per request key.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

pub fn cache_key(req: &LmRequest, sample_index: u64) -> String {
    let material = serde_json::json!({
        "model": req.model,
        "prompt": req.prompt,
        "temperature": req.temperature,
        "sample_index": sample_index,
    });
    hex::encode(Sha256::digest(material.to_string().as_bytes()))
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Stored response, or `None` on a miss. Unreadable or mismatched entries
    /// are reported and treated as misses.
    pub fn get(&self, req: &LmRequest, sample_index: u64) -> Option<LmResponse> {
        let path = self.path_for(&cache_key(req, sample_index));
        let bytes = std::fs::read(&path).ok()?;
        match serde_json::from_slice::<CacheEntry>(&bytes) {
            Ok(e)
                if e.model == req.model
                    && e.prompt == req.prompt
                    && e.temperature == req.temperature
                    && e.sample_index == sample_index =>
            {
                Some(e.response)
            }
            Ok(_) => {
                log::warn!("cache entry {} does not match its request; refetching", path.display());
                None
            }
            Err(err) => {
                log::warn!("corrupt cache entry {}: {err}; refetching", path.display());
                None
            }
        }
    }

    /// Write atomically: temp file in the same directory, then rename.
    pub fn put(&self, req: &LmRequest, sample_index: u64, resp: &LmResponse) -> std::io::Result<()> {
        let entry = CacheEntry {
            model: req.model.clone(),
            prompt: req.prompt.clone(),
            temperature: req.temperature,
            sample_index,
            response: resp.clone(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        serde_json::to_writer_pretty(&mut tmp, &entry)?;
        tmp.flush()?;
        tmp.persist(self.path_for(&cache_key(req, sample_index))).map_err(|e| e.error)?;
        Ok(())
    }
}

/// A completion and whether it came from the cache.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub response: LmResponse,
    pub cached: bool,
}

pub struct LmClient {
    backend: Arc<dyn LanguageModel>,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    rates: RateTable,
    ledger: Mutex<CostLedger>,
}

impl LmClient {
    pub fn new(backend: Arc<dyn LanguageModel>) -> Self {
        LmClient {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            rates: RateTable::default(),
            ledger: Mutex::default(),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rates(mut self, rates: RateTable) -> Self {
        self.rates = rates;
        self
    }

    pub fn rates(&self) -> &RateTable {
        &self.rates
    }

    /// Usage across every caller of this client.
    pub fn ledger(&self) -> CostLedger {
        self.ledger.lock().expect("ledger poisoned").clone()
    }

    /// Serve from cache when possible; otherwise call the backend with
    /// exponential backoff on retryable errors and store the result.
    pub fn cached_complete(&self, req: &LmRequest, ctx: &RequestContext) -> Result<Completion, LmError> {
        if let Some(cache) = &self.cache {
            if let Some(response) = cache.get(req, ctx.sample_index) {
                return Ok(Completion { response, cached: true });
            }
        }
        let mut attempt = 0;
        let response = loop {
            match self.backend.complete(req, ctx) {
                Ok(r) => break r,
                Err(e) if e.retryable() && attempt + 1 < self.retry.max_attempts => {
                    let wait = self.retry.delay(attempt);
                    log::warn!("request failed ({e}); retrying in {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        self.ledger.lock().expect("ledger poisoned").record(&req.model, &response, &self.rates);
        if let Some(cache) = &self.cache {
            if let Err(e) = cache.put(req, ctx.sample_index, &response) {
                log::warn!("cannot write cache entry: {e}");
            }
        }
        Ok(Completion { response, cached: false })
    }

    /// [`cached_complete`](Self::cached_complete), charging misses to `ledger`.
    pub fn complete_into(
        &self,
        req: &LmRequest,
        ctx: &RequestContext,
        ledger: &mut CostLedger,
    ) -> Result<LmResponse, LmError> {
        let c = self.cached_complete(req, ctx)?;
        if !c.cached {
            ledger.record(&req.model, &c.response, &self.rates);
        }
        Ok(c.response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proposer::backend::ScriptedBackend;

    fn req(t: f64) -> LmRequest {
        LmRequest { model: "gpt-4-0613".into(), prompt: "hello".into(), temperature: t, max_tokens: 5 }
    }

    fn ctx(i: u64) -> RequestContext<'static> {
        RequestContext { task_id: "t", sample_index: i, seed: 0 }
    }

    #[test]
    fn second_identical_request_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let backend = Arc::new(ScriptedBackend::new(["a", "b"]));
        let client = LmClient::new(backend.clone()).with_cache(ResponseCache::new(dir.path()).unwrap());
        let first = client.cached_complete(&req(0.0), &ctx(0)).unwrap();
        let second = client.cached_complete(&req(0.0), &ctx(0)).unwrap();
        assert!(!first.cached && second.cached);
        assert_eq!(second.response.text, "a");
        assert_eq!(client.ledger().api_calls, 1);
        assert_eq!(backend.calls(), 1);
    }

    #[test]
    fn sample_index_and_temperature_are_part_of_the_key() {
        assert_ne!(cache_key(&req(0.7), 0), cache_key(&req(0.7), 1));
        assert_ne!(cache_key(&req(0.7), 0), cache_key(&req(0.0), 0));
        let mut other = req(0.7);
        other.max_tokens = 999;
        assert_eq!(cache_key(&req(0.7), 3), cache_key(&other, 3));
    }

    #[test]
    fn corrupt_entry_is_refetched() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        std::fs::write(cache.path_for(&cache_key(&req(0.0), 0)), b"{not json").unwrap();
        let client = LmClient::new(Arc::new(ScriptedBackend::new(["fresh"]))).with_cache(cache.clone());
        let c = client.cached_complete(&req(0.0), &ctx(0)).unwrap();
        assert!(!c.cached);
        assert_eq!(cache.get(&req(0.0), 0).unwrap().text, "fresh");
    }

    #[test]
    fn transient_errors_are_retried_up_to_the_limit() {
        let attempts = Arc::new(std::sync::atomic::AtomicU32::new(0));
        let seen = attempts.clone();
        let backend = ScriptedBackend::from_responder(move |_, _| {
            if seen.fetch_add(1, std::sync::atomic::Ordering::SeqCst) < 2 {
                Err(LmError::Transport("reset".into()))
            } else {
                Ok("ok".into())
            }
        });
        let fast = RetryPolicy { max_attempts: 5, base_delay: Duration::from_millis(1), max_delay: Duration::from_millis(2) };
        let client = LmClient::new(Arc::new(backend)).with_retry(fast);
        assert_eq!(client.cached_complete(&req(0.0), &ctx(0)).unwrap().response.text, "ok");
        assert_eq!(attempts.load(std::sync::atomic::Ordering::SeqCst), 3);
        assert_eq!(client.ledger().api_calls, 1);

        let always = ScriptedBackend::from_responder(|_, _| Err(LmError::Status { code: 500, body: "x".into() }));
        let client = LmClient::new(Arc::new(always)).with_retry(fast);
        assert!(client.cached_complete(&req(0.0), &ctx(0)).is_err());
        assert_eq!(client.ledger().api_calls, 0);
    }

    #[test]
    fn cost_uses_prefix_rates() {
        let rates = RateTable::default();
        assert_eq!(rates.cost("gpt-4-0613", 1000, 1000), 0.03 + 0.06);
        assert!((rates.cost("gpt-3.5-turbo-0613", 2000, 1000) - (0.003 + 0.002)).abs() < 1e-12);
        assert_eq!(rates.cost("claude-2", 1000, 1000), 0.0);
    }
}
