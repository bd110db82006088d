//! Chat-completion client used by the remote hypothesis provider.

use std::time::Duration;

use log::debug;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use url::Url;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RemoteError {
    #[error("environment variable `{0}` holding the API key is not set")]
    MissingCredential(String),
    #[error("transport failed after {attempts} attempts: {message}")]
    TransportError { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("malformed response body: {0}")]
    MalformedResponse(String),
    #[error("invalid remote configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint_url: Url,
    pub model_name: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub timeout: Duration,
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Wait before retry `i` is `retry_backoff[min(i, len - 1)]`.
    pub retry_backoff: Vec<Duration>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint_url: Url::parse("http://127.0.0.1:8000/v1/chat/completions").expect("valid url"),
            model_name: "gpt-4".into(),
            api_key_env: "SMART_API_KEY".into(),
            temperature: 0.0,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            retry_backoff: vec![
                Duration::from_millis(500),
                Duration::from_secs(2),
                Duration::from_secs(8),
            ],
        }
    }
}

impl RemoteConfig {
    pub fn validate(&self) -> Result<(), RemoteError> {
        if self.timeout.is_zero() {
            return Err(RemoteError::Config("timeout must be positive".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(RemoteError::Config(format!("temperature {} is negative", self.temperature)));
        }
        if !matches!(self.endpoint_url.scheme(), "http" | "https") {
            return Err(RemoteError::Config(format!(
                "endpoint scheme `{}` is not http(s)",
                self.endpoint_url.scheme()
            )));
        }
        Ok(())
    }

    fn backoff(&self, retry: u32) -> Duration {
        match self.retry_backoff.len() {
            0 => Duration::ZERO,
            n => self.retry_backoff[(retry as usize).min(n - 1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Sends one POST request. Implementations report transport-level failures
/// as `Err`; any HTTP status is an `Ok` response.
pub trait Transport: Send + Sync {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, String>;
}

/// Blocking HTTP transport.
#[derive(Debug, Default)]
pub struct UreqTransport;

impl Transport for UreqTransport {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(request.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(&request.url);
        for (k, v) in &request.headers {
            req = req.header(k, v);
        }
        let mut resp = req.send(request.body.as_str()).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Choice {
    message: ChatMessage,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChatMessage {
    content: String,
}

pub struct RemoteClient {
    config: RemoteConfig,
    transport: Box<dyn Transport>,
    sleep: fn(Duration),
}

impl std::fmt::Debug for RemoteClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteClient").field("config", &self.config).finish_non_exhaustive()
    }
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Result<Self, RemoteError> {
        Self::with_transport(config, Box::new(UreqTransport))
    }

    pub fn with_transport(config: RemoteConfig, transport: Box<dyn Transport>) -> Result<Self, RemoteError> {
        config.validate()?;
        Ok(RemoteClient {
            config,
            transport,
            sleep: std::thread::sleep,
        })
    }

    /// Replaces the backoff sleep (tests use a no-op).
    pub fn with_sleep(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Sends a system + user message pair and returns the first choice's text.
    pub fn chat_complete(&self, system_message: &str, user_message: &str) -> Result<String, RemoteError> {
        let key = std::env::var(&self.config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| RemoteError::MissingCredential(self.config.api_key_env.clone()))?;
        let redact = |s: &str| s.replace(&key, "[REDACTED]");

        let body = json!({
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": system_message},
                {"role": "user", "content": user_message},
            ],
        })
        .to_string();
        let request = HttpRequest {
            url: self.config.endpoint_url.to_string(),
            headers: vec![
                ("Content-Type".into(), "application/json".into()),
                ("Authorization".into(), format!("Bearer {key}")),
            ],
            body,
            timeout: self.config.timeout,
        };
        debug!("chat request to {}: {}", request.url, redact(&request.body));

        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                (self.sleep)(self.config.backoff(attempt - 1));
            }
            match self.transport.post(&request) {
                Err(e) => last = redact(&e),
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    last = format!("HTTP {}", resp.status);
                }
                Ok(resp) if !(200..300).contains(&resp.status) => {
                    return Err(RemoteError::HttpStatus {
                        status: resp.status,
                        body: redact(&resp.body),
                    });
                }
                Ok(resp) => {
                    debug!("chat response: {}", redact(&resp.body));
                    let parsed: ChatResponse = serde_json::from_str(&resp.body)
                        .map_err(|e| RemoteError::MalformedResponse(redact(&e.to_string())))?;
                    return parsed
                        .choices
                        .into_iter()
                        .next()
                        .map(|c| c.message.content)
                        .ok_or_else(|| RemoteError::MalformedResponse("no choices".into()));
                }
            }
            log::warn!("chat attempt {} of {attempts} failed: {last}", attempt + 1);
        }
        Err(RemoteError::TransportError {
            attempts,
            message: last,
        })
    }
}
