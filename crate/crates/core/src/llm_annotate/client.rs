//! Chat-completion endpoint client.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable holding the endpoint credential.
pub const API_KEY_ENV: &str = "ANNOTATOR_API_KEY";

/// Endpoint settings. The credential is taken from `api_key` when set,
/// otherwise from the `ANNOTATOR_API_KEY` environment variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    60
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: [ChatMessage<'a>; 1],
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

/// Blocking chat client; one completion per call at temperature 0.
pub struct ChatClient {
    http: reqwest::blocking::Client,
    config: EndpointConfig,
    api_key: String,
}

impl ChatClient {
    pub fn new(config: EndpointConfig) -> Result<Self> {
        let api_key = match &config.api_key {
            Some(key) => key.clone(),
            None => std::env::var(API_KEY_ENV).map_err(|_| {
                Error::Endpoint(format!("missing credential: set {API_KEY_ENV} or api_key"))
            })?,
        };
        let http = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Endpoint(e.to_string()))?;
        Ok(Self { http, config, api_key })
    }

    /// Send one user message and return the completion text. Any transport
    /// failure, non-success status or malformed body is an endpoint error.
    pub fn complete(&self, prompt: &str) -> Result<String> {
        let request = ChatRequest {
            model: &self.config.model,
            temperature: 0.0,
            messages: [ChatMessage { role: "user", content: prompt }],
        };
        let response = self
            .http
            .post(&self.config.url)
            .bearer_auth(&self.api_key)
            .json(&request)
            .send()
            .map_err(|e| Error::Endpoint(format!("transport: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            return Err(Error::Endpoint(format!("endpoint returned {status}")));
        }
        let body: ChatResponse = response
            .json()
            .map_err(|e| Error::Endpoint(format!("malformed response: {e}")))?;
        body.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::Endpoint("response has no choices".into()))
    }
}
