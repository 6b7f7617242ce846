//! OpenAI-compatible `/chat/completions` client.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, ChatProvider, GenerationRequest, GenerationResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenAiConfig {
    /// e.g. `https://api.openai.com/v1`
    pub base_url: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    /// Model name sent to the provider, when it differs from the model id.
    #[serde(default)]
    pub api_model: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    300
}

pub struct OpenAiProvider {
    cfg: OpenAiConfig,
    key: String,
    agent: ureq::Agent,
}

impl OpenAiProvider {
    /// Reads the key from the configured environment variable.
    pub fn new(cfg: OpenAiConfig) -> Result<Self, BackendError> {
        let key = std::env::var(&cfg.api_key_env).map_err(|_| BackendError::Config(format!("environment variable {} is not set", cfg.api_key_env)))?;
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(cfg.timeout_secs))).http_status_as_error(false).build().into();
        Ok(OpenAiProvider { cfg, key, agent })
    }

    fn body(&self, req: &GenerationRequest) -> Value {
        let mut b = json!({
            "model": self.cfg.api_model.as_deref().unwrap_or(&req.model),
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "top_p": req.top_p,
            "n": 1,
        });
        if let Some(k) = req.top_k {
            b["top_k"] = json!(k);
        }
        if let Some(m) = req.max_output_tokens {
            b["max_tokens"] = json!(m);
        }
        b
    }
}

/// Maps an HTTP status and body to a result.
pub(crate) fn interpret(status: u16, body: &str, model: &str) -> Result<GenerationResult, BackendError> {
    let short = || body.chars().take(500).collect::<String>();
    match status {
        200..=299 => {}
        401 | 403 => return Err(BackendError::Auth(format!("HTTP {status}: {}", short()))),
        408 | 409 | 429 => return Err(BackendError::RateLimited(format!("HTTP {status}: {}", short()))),
        500..=599 => return Err(BackendError::Transient(format!("HTTP {status}: {}", short()))),
        _ => return Err(BackendError::Malformed { message: format!("HTTP {status}"), raw: body.to_string() }),
    }
    let malformed = |m: &str| BackendError::Malformed { message: m.to_string(), raw: body.to_string() };
    let v: Value = serde_json::from_str(body).map_err(|e| malformed(&format!("invalid JSON: {e}")))?;
    let text = v.pointer("/choices/0/message/content").and_then(Value::as_str).ok_or_else(|| malformed("missing choices[0].message.content"))?;
    let usage = |k: &str| v.pointer(&format!("/usage/{k}")).and_then(Value::as_u64).ok_or_else(|| malformed(&format!("missing usage.{k}")));
    Ok(GenerationResult {
        text: text.to_string(),
        input_tokens: usage("prompt_tokens")?,
        output_tokens: usage("completion_tokens")?,
        model: v.get("model").and_then(Value::as_str).unwrap_or(model).to_string(),
        latency_ms: 0,
        cached: false,
    })
}

impl ChatProvider for OpenAiProvider {
    fn complete(&self, req: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let started = Instant::now();
        let sent = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.key))
            .header("Content-Type", "application/json")
            .send(self.body(req).to_string());
        let mut resp = match sent {
            Ok(r) => r,
            Err(e) => return Err(BackendError::Transient(format!("{url}: {e}"))),
        };
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| BackendError::Transient(format!("reading response: {e}")))?;
        let mut r = interpret(status, &body, &req.model)?;
        r.model = req.model.clone();
        r.latency_ms = started.elapsed().as_millis() as u64;
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert!(matches!(interpret(401, "no", "m"), Err(BackendError::Auth(_))));
        assert!(matches!(interpret(429, "slow", "m"), Err(BackendError::RateLimited(_))));
        assert!(matches!(interpret(503, "", "m"), Err(BackendError::Transient(_))));
        match interpret(200, "{\"oops\": 1}", "m") {
            Err(BackendError::Malformed { raw, .. }) => assert_eq!(raw, "{\"oops\": 1}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn usage_is_taken_from_provider() {
        let body = r#"{"model": "gpt-4o-2024", "choices": [{"message": {"role": "assistant", "content": "sequential"}}], "usage": {"prompt_tokens": 41, "completion_tokens": 7}}"#;
        let r = interpret(200, body, "gpt-4o").unwrap();
        assert_eq!((r.text.as_str(), r.input_tokens, r.output_tokens), ("sequential", 41, 7));
    }

    #[test]
    fn missing_key_env_is_config_error() {
        let cfg = OpenAiConfig { base_url: "http://localhost:1".into(), api_key_env: "AOT_TEST_SURELY_UNSET_KEY".into(), api_model: None, timeout_secs: 1 };
        assert!(matches!(OpenAiProvider::new(cfg), Err(BackendError::Config(_))));
    }
}
