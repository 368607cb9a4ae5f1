use std::time::{Duration, Instant};

use serde_json::{json, Value};
use tracing::{debug, warn};

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError};

pub const DEFAULT_API_KEY_ENV: &str = "BRANCHREACH_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub api_key_env: String,
    pub timeout: Duration,
    /// Extra attempts after a transient failure.
    pub retries: u32,
    pub retry_backoff: Duration,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            timeout: Duration::from_secs(120),
            retries: 2,
            retry_backoff: Duration::from_millis(500),
        }
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::EndpointError { status: None, message: e.to_string() })?;
        Ok(Self { config, client })
    }

    fn body(request: &ChatRequest) -> Value {
        let messages: Vec<Value> =
            request.messages.iter().map(|(role, content)| json!({"role": role.as_str(), "content": content})).collect();
        json!({
            "model": request.model_name,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        })
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let mut call = self.client.post(&self.config.endpoint).json(body);
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            call = call.bearer_auth(key);
        }
        let response = match call.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(GatewayError::EndpointTimeout),
            Err(e) => return Attempt::Retry(GatewayError::EndpointError { status: None, message: e.to_string() }),
        };
        let status = response.status();
        let code = status.as_u16();
        if status.is_server_error() || code == 429 {
            return Attempt::Retry(GatewayError::EndpointError { status: Some(code), message: status.to_string() });
        }
        if !status.is_success() {
            let message = response.text().unwrap_or_default();
            return Attempt::Fatal(GatewayError::EndpointError { status: Some(code), message });
        }
        let parsed: Result<Value, _> = response.json();
        match parsed {
            Ok(v) => match v.pointer("/choices/0/message/content").and_then(Value::as_str) {
                Some(text) => Attempt::Done(text.to_string(), code),
                None => Attempt::Fatal(GatewayError::EndpointError {
                    status: Some(code),
                    message: "response has no choices[0].message.content".into(),
                }),
            },
            Err(e) if e.is_timeout() => Attempt::Retry(GatewayError::EndpointTimeout),
            Err(e) => Attempt::Fatal(GatewayError::EndpointError { status: Some(code), message: e.to_string() }),
        }
    }
}

enum Attempt {
    Done(String, u16),
    Retry(GatewayError),
    Fatal(GatewayError),
}

impl ChatBackend for HttpBackend {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let body = Self::body(request);
        let started = Instant::now();
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(text, endpoint_status) => {
                    let latency_ms = started.elapsed().as_millis() as u64;
                    debug!(latency_ms, attempt, "chat completion");
                    return Ok(ChatResponse { text, latency_ms, endpoint_status });
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) if attempt >= self.config.retries => return Err(e),
                Attempt::Retry(e) => {
                    attempt += 1;
                    warn!(error = %e, attempt, "transient chat endpoint failure, retrying");
                    std::thread::sleep(self.config.retry_backoff * attempt);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Role;

    #[test]
    fn request_body_shape() {
        let mut req = ChatRequest::new("gpt-test", vec![(Role::System, "s".into()), (Role::User, "u".into())]);
        req.max_output_tokens = 99;
        assert_eq!(
            HttpBackend::body(&req),
            json!({
                "model": "gpt-test",
                "messages": [{"role": "system", "content": "s"}, {"role": "user", "content": "u"}],
                "temperature": 0.0,
                "max_tokens": 99
            })
        );
    }
}
