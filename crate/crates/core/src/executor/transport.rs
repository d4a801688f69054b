use std::fmt;

use async_trait::async_trait;
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::Serialize;
use serde_json::Value;

use crate::registry::Method;

/// A fully rendered HTTP request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HttpRequestSpec {
    pub method: Method,
    /// Absolute URL without the query string.
    pub url: String,
    /// Query parameters, already rendered and encoded, in send order.
    pub query: Vec<(String, String)>,
    pub headers: Vec<(String, String)>,
    pub body: Option<Value>,
}

impl HttpRequestSpec {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            method: Method::Get,
            url: url.into(),
            query: Vec::new(),
            headers: Vec::new(),
            body: None,
        }
    }

    /// URL with the query string appended verbatim.
    pub fn full_url(&self) -> String {
        if self.query.is_empty() {
            return self.url.clone();
        }
        let qs: Vec<String> = self.query.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}?{}", self.url, qs.join("&"))
    }
}

impl fmt::Display for HttpRequestSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.method, self.full_url())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn new(status: u16, body: impl Into<String>) -> Self {
        Self {
            status,
            body: body.into(),
        }
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("transport timed out")]
    Timeout,
    #[error("transport disabled: {0}")]
    Disabled(String),
}

/// The single gateway to the network, real or simulated. Implementations must
/// tolerate concurrent `send` calls.
#[async_trait]
pub trait Transport: Send + Sync {
    async fn send(&self, request: &HttpRequestSpec) -> Result<HttpResponse, TransportError>;
}

#[async_trait]
impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    async fn send(&self, request: &HttpRequestSpec) -> Result<HttpResponse, TransportError> {
        (**self).send(request).await
    }
}

/// Live HTTP transport.
#[cfg(feature = "live")]
pub struct LiveTransport {
    client: reqwest::Client,
}

#[cfg(feature = "live")]
impl LiveTransport {
    pub fn new() -> Self {
        Self {
            client: reqwest::Client::new(),
        }
    }
}

#[cfg(feature = "live")]
impl Default for LiveTransport {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(feature = "live")]
#[async_trait]
impl Transport for LiveTransport {
    async fn send(&self, request: &HttpRequestSpec) -> Result<HttpResponse, TransportError> {
        let method = match request.method {
            Method::Get => reqwest::Method::GET,
            Method::Post => reqwest::Method::POST,
        };
        let mut builder = self.client.request(method, request.full_url());
        for (k, v) in &request.headers {
            builder = builder.header(k, v);
        }
        if let Some(body) = &request.body {
            builder = builder.json(body);
        }
        let response = builder.send().await.map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Connect(e.to_string())
            }
        })?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .await
            .map_err(|e| TransportError::Connect(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

/// Bytes left unescaped in path segments and query values. `:` and `,` stay
/// readable so CURIEs and batch separators survive.
const URL_VALUE: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~')
    .remove(b':')
    .remove(b',')
    .remove(b'@')
    .remove(b'!')
    .remove(b'$')
    .remove(b'\'')
    .remove(b'(')
    .remove(b')')
    .remove(b'*')
    .remove(b';');

pub fn encode_url_value(value: &str) -> String {
    utf8_percent_encode(value, URL_VALUE).to_string()
}
