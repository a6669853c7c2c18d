//! HTTP transport for the chat-completion wire protocol.
//!
//! The gateway talks to the network through the [`Transport`] trait so tests
//! can substitute scripted backends; [`HttpTransport`] is the real
//! reqwest-based implementation.

use std::time::Duration;

/// A raw HTTP exchange result: status plus body, before any interpretation.
#[derive(Debug, Clone)]
pub struct RawResponse {
    pub status: u16,
    pub body: String,
}

/// Transport-level failures (no HTTP status was obtained).
#[derive(Debug, Clone, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("transport failure: {0}")]
    Other(String),
}

/// One POST of a JSON body to the chat-completions endpoint.
pub trait Transport: Send + Sync {
    fn post_chat(
        &self,
        url: &str,
        api_key: &str,
        body_json: &str,
    ) -> Result<RawResponse, TransportError>;
}

/// Production transport over a blocking reqwest client.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("reqwest client builds with static configuration");
        Self { client }
    }
}

impl Transport for HttpTransport {
    fn post_chat(
        &self,
        url: &str,
        api_key: &str,
        body_json: &str,
    ) -> Result<RawResponse, TransportError> {
        let response = self
            .client
            .post(url)
            .header("Authorization", format!("Bearer {api_key}"))
            .header("Content-Type", "application/json")
            .body(body_json.to_string())
            .send()
            .map_err(classify_reqwest_error)?;
        let status = response.status().as_u16();
        let body = response.text().map_err(classify_reqwest_error)?;
        Ok(RawResponse { status, body })
    }
}

fn classify_reqwest_error(e: reqwest::Error) -> TransportError {
    if e.is_timeout() {
        TransportError::Timeout
    } else if e.is_connect() {
        TransportError::Connect(e.to_string())
    } else {
        TransportError::Other(e.to_string())
    }
}

/// Join an endpoint base URL with the chat-completions path.
pub fn chat_completions_url(endpoint_url: &str) -> String {
    format!("{}/chat/completions", endpoint_url.trim_end_matches('/'))
}
