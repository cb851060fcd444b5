//! Blocking HTTP helpers shared by the remote providers.

use std::time::Duration;

use serde_json::Value;
use thiserror::Error;

/// Failure reported by an external provider (model, embedder, search,
/// compute service, or a fixture file standing in for one).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    #[error("remote error (status {status}): {body}")]
    Remote { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("fixture error: {0}")]
    Fixture(String),
}

const EXCERPT: usize = 200;

fn excerpt(body: &str) -> String {
    body.chars().take(EXCERPT).collect()
}

fn client(timeout: Duration) -> Result<reqwest::blocking::Client, ProviderError> {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| ProviderError::Transport(e.to_string()))
}

pub fn post_json(
    url: &str,
    token: Option<&str>,
    body: &Value,
    timeout: Duration,
) -> Result<Value, ProviderError> {
    let mut req = client(timeout)?.post(url).json(body);
    if let Some(token) = token {
        req = req.bearer_auth(token);
    }
    let resp = req.send().map_err(|e| ProviderError::Transport(e.to_string()))?;
    let status = resp.status();
    let text = resp
        .text()
        .map_err(|e| ProviderError::Transport(e.to_string()))?;
    if !status.is_success() {
        return Err(ProviderError::Remote {
            status: status.as_u16(),
            body: excerpt(&text),
        });
    }
    serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))
}

pub fn get_text(
    url: &str,
    query: &[(&str, &str)],
    timeout: Duration,
) -> Result<String, ProviderError> {
    let resp = client(timeout)?
        .get(url)
        .query(query)
        .send()
        .map_err(|e| ProviderError::Transport(e.to_string()))?;
    let status = resp.status();
    let text = resp
        .text()
        .map_err(|e| ProviderError::Transport(e.to_string()))?;
    if !status.is_success() {
        return Err(ProviderError::Remote {
            status: status.as_u16(),
            body: excerpt(&text),
        });
    }
    Ok(text)
}
