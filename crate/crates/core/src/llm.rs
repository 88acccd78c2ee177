//! Chat-completion gateway: context guard, live HTTP adapters, fixture replay,
//! retry and per-provider rate limiting.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::prompt::{estimate_tokens, Technique};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiKind {
    Openai,
    Anthropic,
    Gemini,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderProfile {
    pub name: String,
    pub model_id: String,
    pub context_window: u64,
    /// USD per 1000 input tokens
    pub input_rate: f64,
    /// USD per 1000 output tokens
    pub output_rate: f64,
    /// `{model}` is replaced by `model_id`
    pub endpoint: String,
    pub auth_env_var: String,
    pub api: ApiKind,
    #[serde(default = "default_rpm")]
    pub requests_per_minute: u32,
}

fn default_rpm() -> u32 {
    60
}

impl ProviderProfile {
    pub fn validate(&self) -> Result<(), String> {
        if self.context_window == 0 {
            return Err(format!("provider {}: context_window must be > 0", self.name));
        }
        if self.input_rate < 0.0 || self.output_rate < 0.0 {
            return Err(format!("provider {}: negative rate", self.name));
        }
        Ok(())
    }

    pub fn cost(&self, input_tokens: u64, output_tokens: u64) -> f64 {
        input_tokens as f64 * self.input_rate / 1000.0 + output_tokens as f64 * self.output_rate / 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Replay,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Live => "LIVE",
            Mode::Replay => "REPLAY",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(Mode::Live),
            "replay" => Ok(Mode::Replay),
            other => Err(format!("unknown mode {other:?} (expected live or replay)")),
        }
    }
}

/// `C1-zero-gpt`: capability, technique key, provider.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExperimentKey {
    pub capability: String,
    pub technique: Technique,
    pub provider: String,
}

impl ExperimentKey {
    pub fn new(capability: &str, technique: Technique, provider: &str) -> Self {
        ExperimentKey {
            capability: capability.to_string(),
            technique,
            provider: provider.to_string(),
        }
    }

    pub fn fixture_path(&self, fixtures: &Path) -> PathBuf {
        fixtures
            .join(&self.provider)
            .join(format!("{}-{}.txt", self.capability, self.technique.key()))
    }
}

impl fmt::Display for ExperimentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.capability, self.technique.key(), self.provider)
    }
}

impl FromStr for ExperimentKey {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let mut parts = s.splitn(3, '-');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(t), Some(p)) if !c.is_empty() && !p.is_empty() => Ok(ExperimentKey {
                capability: c.to_string(),
                technique: t.parse().map_err(|e| format!("{e}"))?,
                provider: p.to_string(),
            }),
            _ => Err(format!("bad experiment key {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub provider: ProviderProfile,
    pub prompt: String,
    pub temperature: f64,
    pub max_output_tokens: u64,
    pub experiment_key: ExperimentKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost: f64,
    pub latency_ms: u64,
    pub mode: Mode,
    pub retries: u32,
    pub provider: String,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{provider}: prompt ~{prompt_tokens} tokens + {max_output} output tokens exceeds the {window}-token window by {overflow}")]
pub struct GuardRejection {
    pub provider: String,
    pub prompt_tokens: u64,
    pub max_output: u64,
    pub window: u64,
    pub overflow: u64,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("context guard: {0}")]
    Guard(#[from] GuardRejection),
    #[error("{provider}: environment variable {env_var} is not set")]
    MissingCredentials { provider: String, env_var: String },
    #[error("no fixture for {key} at {}", path.display())]
    FixtureNotFound { key: String, path: PathBuf },
    #[error("{provider}: HTTP {status}: {message}")]
    Provider {
        provider: String,
        status: u16,
        message: String,
    },
    #[error("{provider}: gave up after {attempts} attempts: {last}")]
    RetriesExhausted {
        provider: String,
        attempts: u32,
        last: String,
    },
    #[error("{provider}: unexpected response body: {message}")]
    Decode { provider: String, message: String },
    #[error("reading {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub fn guard_context(req: &CompletionRequest) -> Result<(), GuardRejection> {
    let prompt_tokens = estimate_tokens(&req.prompt) as u64;
    let needed = prompt_tokens + req.max_output_tokens;
    let window = req.provider.context_window;
    if needed > window {
        return Err(GuardRejection {
            provider: req.provider.name.clone(),
            prompt_tokens,
            max_output: req.max_output_tokens,
            window,
            overflow: needed - window,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostReport {
    pub count: usize,
    pub total: f64,
    pub mean: f64,
}

pub fn cost_report(results: &[CompletionResult]) -> CostReport {
    let total: f64 = results.iter().map(|r| r.cost).sum();
    CostReport {
        count: results.len(),
        total,
        mean: if results.is_empty() { 0.0 } else { total / results.len() as f64 },
    }
}

type EnvLookup = dyn Fn(&str) -> Option<String> + Send + Sync;

pub struct Gateway {
    mode: Mode,
    fixtures: PathBuf,
    retry: RetryPolicy,
    timeout: Duration,
    env: Box<EnvLookup>,
    client: Mutex<Option<reqwest::blocking::Client>>,
    limiters: Mutex<HashMap<String, Arc<Mutex<Option<Instant>>>>>,
}

impl Gateway {
    pub fn new(mode: Mode, fixtures: impl Into<PathBuf>) -> Self {
        Gateway {
            mode,
            fixtures: fixtures.into(),
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(300),
            env: Box::new(|k| std::env::var(k).ok().filter(|v| !v.is_empty())),
            client: Mutex::new(None),
            limiters: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Replace the environment lookup used for API keys.
    pub fn with_env(mut self, env: impl Fn(&str) -> Option<String> + Send + Sync + 'static) -> Self {
        self.env = Box::new(env);
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// First missing credential among `providers`, as (provider, env var).
    pub fn missing_credentials<'a>(&self, providers: impl IntoIterator<Item = &'a ProviderProfile>) -> Option<(String, String)> {
        providers
            .into_iter()
            .find(|p| (self.env)(&p.auth_env_var).is_none())
            .map(|p| (p.name.clone(), p.auth_env_var.clone()))
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        guard_context(req)?;
        match self.mode {
            Mode::Replay => self.replay(req),
            Mode::Live => self.live(req),
        }
    }

    fn replay(&self, req: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        let path = req.experiment_key.fixture_path(&self.fixtures);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(LlmError::FixtureNotFound {
                    key: req.experiment_key.to_string(),
                    path,
                })
            }
            Err(source) => return Err(LlmError::Io { path, source }),
        };
        let input_tokens = estimate_tokens(&req.prompt) as u64;
        let output_tokens = estimate_tokens(&text) as u64;
        Ok(CompletionResult {
            input_tokens,
            output_tokens,
            cost: req.provider.cost(input_tokens, output_tokens),
            latency_ms: 0,
            mode: Mode::Replay,
            retries: 0,
            provider: req.provider.name.clone(),
            model_id: req.provider.model_id.clone(),
            text,
        })
    }

    fn client(&self) -> Result<reqwest::blocking::Client, LlmError> {
        let mut slot = self.client.lock().unwrap();
        if let Some(c) = slot.as_ref() {
            return Ok(c.clone());
        }
        let c = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| LlmError::Decode {
                provider: "http".into(),
                message: e.to_string(),
            })?;
        *slot = Some(c.clone());
        Ok(c)
    }

    fn limiter(&self, provider: &str) -> Arc<Mutex<Option<Instant>>> {
        self.limiters
            .lock()
            .unwrap()
            .entry(provider.to_string())
            .or_default()
            .clone()
    }

    fn live(&self, req: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        let p = &req.provider;
        let key = (self.env)(&p.auth_env_var).ok_or_else(|| LlmError::MissingCredentials {
            provider: p.name.clone(),
            env_var: p.auth_env_var.clone(),
        })?;
        let client = self.client()?;
        let (url, body) = build_request(req);

        // Held for the whole exchange: one request at a time per provider.
        let limiter = self.limiter(&p.name);
        let mut last = limiter.lock().unwrap();
        let started = Instant::now();
        let mut attempt = 0;
        loop {
            if p.requests_per_minute > 0 {
                let gap = Duration::from_secs(60) / p.requests_per_minute;
                if let Some(prev) = *last {
                    let since = prev.elapsed();
                    if since < gap {
                        thread::sleep(gap - since);
                    }
                }
            }
            *last = Some(Instant::now());
            attempt += 1;
            let outcome = send(&client, p, &url, &key, &body);
            let (retry_after, failure) = match outcome {
                Ok(v) => {
                    let (text, input_tokens, output_tokens) = parse_response(p, &v)?;
                    return Ok(CompletionResult {
                        text,
                        input_tokens,
                        output_tokens,
                        cost: p.cost(input_tokens, output_tokens),
                        latency_ms: started.elapsed().as_millis() as u64,
                        mode: Mode::Live,
                        retries: attempt - 1,
                        provider: p.name.clone(),
                        model_id: p.model_id.clone(),
                    });
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient { retry_after, message }) => (retry_after, message),
            };
            log::warn!("{}: attempt {attempt} failed: {failure}", p.name);
            if attempt >= self.retry.attempts {
                return Err(LlmError::RetriesExhausted {
                    provider: p.name.clone(),
                    attempts: attempt,
                    last: failure,
                });
            }
            let backoff = Duration::from_millis(self.retry.base_delay_ms.saturating_mul(1 << (attempt - 1)));
            thread::sleep(retry_after.map_or(backoff, |r| r.max(backoff)));
        }
    }
}

enum Attempt {
    Fatal(LlmError),
    Transient {
        retry_after: Option<Duration>,
        message: String,
    },
}

fn send(
    client: &reqwest::blocking::Client,
    p: &ProviderProfile,
    url: &str,
    key: &str,
    body: &Value,
) -> Result<Value, Attempt> {
    let mut rb = client.post(url).json(body);
    rb = match p.api {
        ApiKind::Openai => rb.bearer_auth(key),
        ApiKind::Anthropic => rb.header("x-api-key", key).header("anthropic-version", "2023-06-01"),
        ApiKind::Gemini => rb.header("x-goog-api-key", key),
    };
    let resp = rb.send().map_err(|e| Attempt::Transient {
        retry_after: None,
        message: e.to_string(),
    })?;
    let status = resp.status();
    let retry_after = resp
        .headers()
        .get(reqwest::header::RETRY_AFTER)
        .and_then(|v| v.to_str().ok())
        .and_then(|s| s.trim().parse::<u64>().ok())
        .map(Duration::from_secs);
    let text = resp.text().map_err(|e| Attempt::Transient {
        retry_after: None,
        message: e.to_string(),
    })?;
    if status.is_server_error() || status.as_u16() == 429 {
        return Err(Attempt::Transient {
            retry_after,
            message: format!("HTTP {}: {}", status.as_u16(), snippet(&text)),
        });
    }
    if !status.is_success() {
        return Err(Attempt::Fatal(LlmError::Provider {
            provider: p.name.clone(),
            status: status.as_u16(),
            message: snippet(&text),
        }));
    }
    serde_json::from_str(&text).map_err(|e| {
        Attempt::Fatal(LlmError::Decode {
            provider: p.name.clone(),
            message: e.to_string(),
        })
    })
}

fn snippet(s: &str) -> String {
    s.chars().take(300).collect()
}

/// Provider-specific URL and JSON body.
pub fn build_request(req: &CompletionRequest) -> (String, Value) {
    let p = &req.provider;
    let url = p.endpoint.replace("{model}", &p.model_id);
    let body = match p.api {
        ApiKind::Openai => json!({
            "model": p.model_id,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }),
        ApiKind::Anthropic => json!({
            "model": p.model_id,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }),
        ApiKind::Gemini => json!({
            "contents": [{"role": "user", "parts": [{"text": req.prompt}]}],
            "generationConfig": {
                "temperature": req.temperature,
                "maxOutputTokens": req.max_output_tokens,
            },
        }),
    };
    (url, body)
}

/// Extract (text, input tokens, output tokens) from a provider response.
pub fn parse_response(p: &ProviderProfile, v: &Value) -> Result<(String, u64, u64), LlmError> {
    let bad = |what: &str| LlmError::Decode {
        provider: p.name.clone(),
        message: format!("missing {what}"),
    };
    let u = |x: &Value| x.as_u64().unwrap_or(0);
    match p.api {
        ApiKind::Openai => {
            let text = v["choices"][0]["message"]["content"]
                .as_str()
                .ok_or_else(|| bad("choices[0].message.content"))?;
            Ok((text.to_string(), u(&v["usage"]["prompt_tokens"]), u(&v["usage"]["completion_tokens"])))
        }
        ApiKind::Anthropic => {
            let parts = v["content"].as_array().ok_or_else(|| bad("content"))?;
            let text: String = parts.iter().filter_map(|c| c["text"].as_str()).collect();
            Ok((text, u(&v["usage"]["input_tokens"]), u(&v["usage"]["output_tokens"])))
        }
        ApiKind::Gemini => {
            let parts = v["candidates"][0]["content"]["parts"]
                .as_array()
                .ok_or_else(|| bad("candidates[0].content.parts"))?;
            let text: String = parts.iter().filter_map(|c| c["text"].as_str()).collect();
            let m = &v["usageMetadata"];
            Ok((text, u(&m["promptTokenCount"]), u(&m["candidatesTokenCount"])))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn profile(window: u64) -> ProviderProfile {
        ProviderProfile {
            name: "gemini".into(),
            model_id: "gemini-1.0-pro".into(),
            context_window: window,
            input_rate: 0.01,
            output_rate: 0.03,
            endpoint: "http://127.0.0.1:9/{model}".into(),
            auth_env_var: "NO_SUCH_KEY_VAR".into(),
            api: ApiKind::Gemini,
            requests_per_minute: 0,
        }
    }

    fn request(prompt: &str, window: u64, max_out: u64) -> CompletionRequest {
        CompletionRequest {
            provider: profile(window),
            prompt: prompt.into(),
            temperature: 0.0,
            max_output_tokens: max_out,
            experiment_key: ExperimentKey::new("C1", Technique::Zero, "gemini"),
        }
    }

    #[test]
    fn guard_boundaries() {
        assert!(guard_context(&request("", 10, 10)).is_ok());
        let p = "x".repeat(40);
        assert!(guard_context(&request(&p, 20, 10)).is_ok());
        let err = guard_context(&request(&p, 19, 10)).unwrap_err();
        assert_eq!(err.overflow, 1);
        assert!(err.to_string().contains("gemini"));
    }

    #[test]
    fn key_roundtrip() {
        let k: ExperimentKey = "C1-zero-gpt".parse().unwrap();
        assert_eq!(k, ExperimentKey::new("C1", Technique::Zero, "gpt"));
        assert_eq!(k.to_string(), "C1-zero-gpt");
        assert_eq!(k.fixture_path(Path::new("f")), Path::new("f/gpt/C1-zero.txt"));
        assert!("C1".parse::<ExperimentKey>().is_err());
    }

    #[test]
    fn cost_arithmetic() {
        assert_eq!(cost_report(&[]).mean, 0.0);
        let mk = |cost| CompletionResult {
            text: String::new(),
            input_tokens: 0,
            output_tokens: 0,
            cost,
            latency_ms: 0,
            mode: Mode::Replay,
            retries: 0,
            provider: "p".into(),
            model_id: "m".into(),
        };
        let r = cost_report(&[mk(0.10), mk(0.30)]);
        assert!((r.mean - 0.20).abs() < 1e-12);
        assert!((r.total - 0.40).abs() < 1e-12);
        assert!((profile(1).cost(1000, 2000) - 0.07).abs() < 1e-12);
    }

    #[test]
    fn live_without_key_is_typed() {
        let gw = Gateway::new(Mode::Live, "nowhere").with_env(|_| None);
        match gw.complete(&request("hi", 100, 10)) {
            Err(LlmError::MissingCredentials { env_var, .. }) => assert_eq!(env_var, "NO_SUCH_KEY_VAR"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn response_adapters() {
        let mut p = profile(1);
        let v = json!({"candidates":[{"content":{"parts":[{"text":"a"},{"text":"b"}]}}],
                       "usageMetadata":{"promptTokenCount":3,"candidatesTokenCount":4}});
        assert_eq!(parse_response(&p, &v).unwrap(), ("ab".into(), 3, 4));
        p.api = ApiKind::Anthropic;
        let v = json!({"content":[{"type":"text","text":"hey"}],"usage":{"input_tokens":5,"output_tokens":6}});
        assert_eq!(parse_response(&p, &v).unwrap(), ("hey".into(), 5, 6));
        p.api = ApiKind::Openai;
        assert!(parse_response(&p, &v).is_err());
    }
}
