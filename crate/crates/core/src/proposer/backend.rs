//! Language-model backends: a deterministic scripted stand-in and an HTTP
//! chat-completions client.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_API_KEY: &str = "INDUCTOR_API_KEY";
pub const ENV_BASE_URL: &str = "INDUCTOR_BASE_URL";
pub const ENV_MODEL: &str = "INDUCTOR_MODEL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Who is asking, and for which sample.
#[derive(Debug, Clone, Copy)]
pub struct RequestContext<'a> {
    pub task_id: &'a str,
    pub sample_index: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("scripted responses exhausted for task `{0}`")]
    QueueExhausted(String),
    #[error("{0}")]
    Scripted(String),
}

impl LmError {
    pub fn retryable(&self) -> bool {
        match self {
            LmError::Transport(_) => true,
            LmError::Status { code, .. } => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

pub trait LanguageModel: Send + Sync {
    fn complete(&self, req: &LmRequest, ctx: &RequestContext) -> Result<LmResponse, LmError>;
}

/// Rough token count used where the backend reports none.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

type Responder = dyn Fn(&LmRequest, &RequestContext) -> Result<String, LmError> + Send + Sync;

/// Replays queued responses in call order, per task when a task queue is
/// registered and from a shared queue otherwise. A responder closure can
/// replace the queues entirely.
pub struct ScriptedBackend {
    shared: Mutex<VecDeque<String>>,
    per_task: Mutex<HashMap<String, VecDeque<String>>>,
    responder: Option<Box<Responder>>,
    calls: AtomicU64,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedBackend {
            shared: Mutex::new(responses.into_iter().map(Into::into).collect()),
            per_task: Mutex::default(),
            responder: None,
            calls: AtomicU64::new(0),
        }
    }

    pub fn from_responder<F>(f: F) -> Self
    where
        F: Fn(&LmRequest, &RequestContext) -> Result<String, LmError> + Send + Sync + 'static,
    {
        ScriptedBackend { responder: Some(Box::new(f)), ..ScriptedBackend::new(Vec::<String>::new()) }
    }

    pub fn with_task<I, S>(self, task_id: &str, responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.per_task
            .lock()
            .expect("scripted queue poisoned")
            .insert(task_id.to_owned(), responses.into_iter().map(Into::into).collect());
        self
    }

    /// Number of completions served so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LanguageModel for ScriptedBackend {
    fn complete(&self, req: &LmRequest, ctx: &RequestContext) -> Result<LmResponse, LmError> {
        let text = if let Some(f) = &self.responder {
            f(req, ctx)?
        } else {
            let mut per_task = self.per_task.lock().expect("scripted queue poisoned");
            match per_task.get_mut(ctx.task_id) {
                Some(queue) => queue.pop_front(),
                None => self.shared.lock().expect("scripted queue poisoned").pop_front(),
            }
            .ok_or_else(|| LmError::QueueExhausted(ctx.task_id.to_owned()))?
        };
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(LmResponse {
            prompt_tokens: estimate_tokens(&req.prompt),
            completion_tokens: estimate_tokens(&text),
            text,
        })
    }
}

/// Spaces request starts at least `interval` apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(requests: u32) -> Self {
        let interval = if requests == 0 { Duration::ZERO } else { Duration::from_secs(60) / requests };
        RateLimiter { interval, next: Mutex::new(None) }
    }

    pub fn acquire(&self) {
        if self.interval.is_zero() {
            return;
        }
        let wait = {
            let mut next = self.next.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let start = next.map_or(now, |n| n.max(now));
            *next = Some(start + self.interval);
            start - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// OpenAI-compatible chat-completions endpoint, one user message per request.
pub struct HttpBackend {
    agent: ureq::Agent,
    base_url: String,
    api_key: Option<String>,
    limiter: RateLimiter,
    send_seed: bool,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, requests_per_minute: u32) -> Self {
        HttpBackend {
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(300)).build(),
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            api_key,
            limiter: RateLimiter::per_minute(requests_per_minute),
            send_seed: false,
        }
    }

    /// Endpoint and key from `INDUCTOR_BASE_URL` / `INDUCTOR_API_KEY`.
    pub fn from_env(requests_per_minute: u32) -> Self {
        let base = std::env::var(ENV_BASE_URL).unwrap_or_else(|_| DEFAULT_BASE_URL.to_owned());
        HttpBackend::new(base, std::env::var(ENV_API_KEY).ok(), requests_per_minute)
    }

    /// Forward the run seed in the request body (honored by some endpoints).
    pub fn sending_seed(mut self, on: bool) -> Self {
        self.send_seed = on;
        self
    }

    pub fn request_body(&self, req: &LmRequest, ctx: &RequestContext) -> serde_json::Value {
        let mut body = serde_json::json!({
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if self.send_seed {
            body["seed"] = serde_json::json!(ctx.seed.wrapping_add(ctx.sample_index));
        }
        body
    }
}

impl LanguageModel for HttpBackend {
    fn complete(&self, req: &LmRequest, ctx: &RequestContext) -> Result<LmResponse, LmError> {
        self.limiter.acquire();
        let mut call = self.agent.post(&format!("{}/chat/completions", self.base_url));
        if let Some(key) = &self.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let reply = match call.send_json(self.request_body(req, ctx)) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, r)) => {
                return Err(LmError::Status { code, body: r.into_string().unwrap_or_default() })
            }
            Err(e) => return Err(LmError::Transport(e.to_string())),
        };
        let json: serde_json::Value = reply.into_json().map_err(|e| LmError::Malformed(e.to_string()))?;
        let text = json["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| LmError::Malformed("missing choices[0].message.content".into()))?
            .to_owned();
        let usage = &json["usage"];
        Ok(LmResponse {
            prompt_tokens: usage["prompt_tokens"].as_u64().unwrap_or_else(|| estimate_tokens(&req.prompt)),
            completion_tokens: usage["completion_tokens"].as_u64().unwrap_or_else(|| estimate_tokens(&text)),
            text,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(task: &str) -> RequestContext<'_> {
        RequestContext { task_id: task, sample_index: 0, seed: 0 }
    }

    fn req() -> LmRequest {
        LmRequest { model: "m".into(), prompt: "p".into(), temperature: 0.0, max_tokens: 10 }
    }

    #[test]
    fn scripted_replays_in_order() {
        let b = ScriptedBackend::new(["Rule: h1", "Rule: h2"]);
        assert_eq!(b.complete(&req(), &ctx("t")).unwrap().text, "Rule: h1");
        assert_eq!(b.complete(&req(), &ctx("t")).unwrap().text, "Rule: h2");
        assert_eq!(b.complete(&req(), &ctx("t")), Err(LmError::QueueExhausted("t".into())));
        assert_eq!(b.calls(), 2);
    }

    #[test]
    fn per_task_queues_are_independent() {
        let b = ScriptedBackend::new(["shared"]).with_task("a", ["a1"]);
        assert_eq!(b.complete(&req(), &ctx("a")).unwrap().text, "a1");
        assert_eq!(b.complete(&req(), &ctx("b")).unwrap().text, "shared");
        assert!(b.complete(&req(), &ctx("a")).is_err());
    }

    #[test]
    fn retryable_classification() {
        assert!(LmError::Transport("x".into()).retryable());
        assert!(LmError::Status { code: 429, body: String::new() }.retryable());
        assert!(LmError::Status { code: 503, body: String::new() }.retryable());
        assert!(!LmError::Status { code: 400, body: String::new() }.retryable());
        assert!(!LmError::QueueExhausted("t".into()).retryable());
    }

    #[test]
    fn request_body_is_a_single_user_message() {
        let b = HttpBackend::new("http://localhost:1/", None, 0);
        let body = b.request_body(&req(), &ctx("t"));
        assert_eq!(body["messages"].as_array().unwrap().len(), 1);
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["temperature"], 0.0);
        assert!(body.get("seed").is_none());
    }
}
