//! HTTP fetch abstraction used by the mock sandbox's `curl`.
//!
//! The network implementation uses reqwest; the simulated environment
//! provides an in-process implementation so tests need no sockets.

use std::collections::BTreeMap;
use std::time::Duration;

use async_trait::async_trait;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchRequest {
    pub method: String,
    pub url: String,
    pub headers: BTreeMap<String, String>,
    pub body: Option<String>,
}

impl FetchRequest {
    pub fn get(url: impl Into<String>) -> Self {
        FetchRequest {
            method: "GET".into(),
            url: url.into(),
            headers: BTreeMap::new(),
            body: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchResponse {
    pub status: u16,
    pub reason: String,
    /// Header order as sent by the server.
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl FetchResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    /// Response as `curl -i` prints it.
    pub fn render(&self, include_head: bool) -> Vec<u8> {
        let mut out = Vec::new();
        if include_head {
            out.extend_from_slice(format!("HTTP/1.1 {} {}\r\n", self.status, self.reason).as_bytes());
            for (k, v) in &self.headers {
                out.extend_from_slice(format!("{k}: {v}\r\n").as_bytes());
            }
            out.extend_from_slice(b"\r\n");
        }
        out.extend_from_slice(&self.body);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("could not connect: {0}")]
    Connect(String),
    #[error("operation timed out")]
    Timeout,
    #[error("bad url: {0}")]
    BadUrl(String),
}

impl FetchError {
    /// Exit code curl uses for the same failure.
    pub fn curl_exit_code(&self) -> i64 {
        match self {
            FetchError::BadUrl(_) => 3,
            FetchError::Connect(_) => 7,
            FetchError::Timeout => 28,
        }
    }
}

#[async_trait]
pub trait Fetcher: Send + Sync {
    async fn fetch(&self, req: FetchRequest, timeout: Duration) -> Result<FetchResponse, FetchError>;
}

/// Real network fetches.
pub struct HttpFetcher {
    client: reqwest::Client,
}

impl HttpFetcher {
    pub fn new() -> Self {
        HttpFetcher {
            client: reqwest::Client::builder()
                .redirect(reqwest::redirect::Policy::none())
                .build()
                .expect("building http client"),
        }
    }
}

impl Default for HttpFetcher {
    fn default() -> Self {
        Self::new()
    }
}

#[async_trait]
impl Fetcher for HttpFetcher {
    async fn fetch(&self, req: FetchRequest, timeout: Duration) -> Result<FetchResponse, FetchError> {
        let method = reqwest::Method::from_bytes(req.method.as_bytes())
            .map_err(|_| FetchError::BadUrl(format!("bad method {}", req.method)))?;
        let url = reqwest::Url::parse(&req.url).map_err(|e| FetchError::BadUrl(e.to_string()))?;
        let mut rb = self.client.request(method, url).timeout(timeout);
        for (k, v) in &req.headers {
            rb = rb.header(k, v);
        }
        if let Some(b) = req.body {
            rb = rb.body(b);
        }
        let map_err = |e: reqwest::Error| {
            if e.is_timeout() {
                FetchError::Timeout
            } else {
                FetchError::Connect(e.to_string())
            }
        };
        let resp = rb.send().await.map_err(map_err)?;
        let status = resp.status();
        let headers = resp
            .headers()
            .iter()
            .map(|(k, v)| (k.as_str().to_string(), String::from_utf8_lossy(v.as_bytes()).into_owned()))
            .collect();
        let body = resp.bytes().await.map_err(map_err)?.to_vec();
        Ok(FetchResponse {
            status: status.as_u16(),
            reason: status.canonical_reason().unwrap_or("").to_string(),
            headers,
            body,
        })
    }
}
