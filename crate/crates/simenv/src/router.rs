//! In-process transport: answers `FetchRequest`s by calling the services
//! directly, for sandboxes that should not touch the network.

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use explorer_core::sandbox::fetch::{FetchError, FetchRequest, FetchResponse, Fetcher};
use url::Url;

use crate::manifest::Manifest;
use crate::services::{Service, SimRequest};

#[derive(Clone)]
pub struct SimRouter {
    host: String,
    routes: Vec<(u16, Arc<Service>)>,
}

impl SimRouter {
    pub fn new(host: &str, routes: Vec<(u16, Arc<Service>)>) -> Self {
        SimRouter {
            host: host.to_string(),
            routes,
        }
    }

    /// Routes on the manifest's declared ports without binding anything.
    pub fn from_manifest(manifest: &Manifest) -> Self {
        let clock = manifest.clock();
        let routes = manifest
            .services
            .iter()
            .map(|s| (s.port, Arc::new(Service::new(s.clone(), clock))))
            .collect();
        Self::new(&manifest.host, routes)
    }

    fn accepts_host(&self, host: &str) -> bool {
        host == self.host || matches!(host, "localhost" | "127.0.0.1")
    }

    pub fn handle(&self, req: &FetchRequest) -> Result<FetchResponse, FetchError> {
        let url = Url::parse(&req.url).map_err(|e| FetchError::BadUrl(format!("{}: {e}", req.url)))?;
        if url.scheme() != "http" {
            return Err(FetchError::BadUrl(format!("unsupported scheme {}", url.scheme())));
        }
        let host = url.host_str().unwrap_or_default();
        let port = url.port_or_known_default().unwrap_or(80);
        let refused = || FetchError::Connect(format!("connection refused: {host}:{port}"));
        if !self.accepts_host(host) {
            return Err(refused());
        }
        let svc = self.routes.iter().find(|(p, _)| *p == port).map(|(_, s)| s).ok_or_else(refused)?;
        let target = match url.query() {
            Some(q) => format!("{}?{q}", url.path()),
            None => url.path().to_string(),
        };
        let r = svc.respond(&SimRequest::new(&req.method, &target, req.body.as_deref()));
        Ok(FetchResponse {
            status: r.status,
            reason: r.reason().to_string(),
            headers: r.headers(),
            body: r.body.into_bytes(),
        })
    }
}

#[async_trait]
impl Fetcher for SimRouter {
    async fn fetch(&self, req: FetchRequest, _timeout: Duration) -> Result<FetchResponse, FetchError> {
        self.handle(&req)
    }
}
