//! Simulated target environment: loopback HTTP services with planted
//! vulnerabilities, dead-end noise sites, and ground truth for scoring.

pub mod banner;
pub mod manifest;
pub mod router;
pub mod services;
pub mod shell;

use std::sync::Arc;

use axum::body::Body;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode, Uri};
use axum::response::Response;
use axum::Router;
use explorer_core::domain::{EntryPoint, GroundTruth, ServiceKind as EpKind};
use hyper::server::conn::http1;
use hyper_util::rt::TokioIo;
use hyper_util::service::TowerToHyperService;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::JoinHandle;

pub use manifest::{Manifest, ServiceKind, ServiceSpec};
pub use router::SimRouter;
pub use services::{Service, SimRequest, SimResponse};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("invalid manifest: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("port {0} is already in use")]
    PortInUse(u16),
}

/// Running environment. Dropping the handle without `shutdown` leaves the
/// listeners running until the runtime ends.
pub struct SimHandle {
    manifest: Manifest,
    ports: Vec<u16>,
    services: Vec<Arc<Service>>,
    stop: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl SimHandle {
    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Bound ports, index-aligned with the manifest's services.
    pub fn ports(&self) -> &[u16] {
        &self.ports
    }

    pub fn ground_truth(&self) -> GroundTruth {
        self.manifest.ground_truth(&self.ports)
    }

    /// Entrypoints as recon would report them, in port order.
    pub fn entrypoints(&self) -> Vec<EntryPoint> {
        let mut eps: Vec<EntryPoint> = self
            .ports
            .iter()
            .map(|p| EntryPoint::new(self.manifest.host.clone(), *p, EpKind::Http))
            .collect();
        eps.sort_by_key(|e| e.port);
        eps
    }

    /// In-process view of the running services.
    pub fn router(&self) -> SimRouter {
        SimRouter::new(
            &self.manifest.host,
            self.ports.iter().copied().zip(self.services.iter().cloned()).collect(),
        )
    }

    pub fn url(&self, index: usize) -> String {
        format!("http://{}:{}", self.manifest.host, self.ports[index])
    }

    /// Stops accepting, then waits for the accept loops to exit.
    pub async fn shutdown(self) {
        let _ = self.stop.send(true);
        for t in self.tasks {
            let _ = t.await;
        }
    }
}

async fn handle(State(svc): State<Arc<Service>>, method: Method, uri: Uri, body: String) -> Response {
    let target = uri.path_and_query().map(|p| p.as_str()).unwrap_or("/");
    let req = SimRequest::new(method.as_str(), target, Some(&body));
    to_http(svc.respond(&req))
}

fn to_http(r: SimResponse) -> Response {
    let mut resp = Response::new(Body::from(r.body));
    *resp.status_mut() = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let h = resp.headers_mut();
    if let Ok(v) = HeaderValue::from_str(&r.server) {
        h.insert(header::SERVER, v);
    }
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static(SimResponse::CONTENT_TYPE));
    resp
}

/// Binds every service and starts serving. Port 0 binds an ephemeral port.
pub async fn serve(manifest: Manifest) -> Result<SimHandle, SimError> {
    manifest.validate()?;
    let clock = manifest.clock();
    let (stop, _) = watch::channel(false);
    let mut ports = Vec::new();
    let mut services = Vec::new();
    let mut listeners = Vec::new();
    for spec in &manifest.services {
        let addr = format!("{}:{}", manifest.host, spec.port);
        let listener = TcpListener::bind(&addr).await.map_err(|e| match e.kind() {
            std::io::ErrorKind::AddrInUse => SimError::PortInUse(spec.port),
            _ => SimError::Io(format!("bind {addr}: {e}")),
        })?;
        let local = listener.local_addr().map_err(|e| SimError::Io(e.to_string()))?;
        ports.push(local.port());
        services.push(Arc::new(Service::new(spec.clone(), clock)));
        listeners.push(listener);
    }
    let tasks = listeners
        .into_iter()
        .zip(&services)
        .map(|(l, svc)| {
            let app = Router::new().fallback(handle).with_state(Arc::clone(svc));
            tokio::spawn(accept_loop(l, app, stop.subscribe()))
        })
        .collect();
    tracing::info!(?ports, "simulated environment up");
    Ok(SimHandle {
        manifest,
        ports,
        services,
        stop,
        tasks,
    })
}

async fn accept_loop(listener: TcpListener, app: Router, mut stop: watch::Receiver<bool>) {
    loop {
        tokio::select! {
            r = listener.accept() => {
                let Ok((stream, _peer)) = r else { continue };
                let svc = TowerToHyperService::new(app.clone());
                let mut stop = stop.clone();
                tokio::spawn(async move {
                    // no Date header, so identical requests yield identical bytes
                    let conn = http1::Builder::new()
                        .auto_date_header(false)
                        .serve_connection(TokioIo::new(stream), svc);
                    tokio::pin!(conn);
                    tokio::select! {
                        _ = conn.as_mut() => {}
                        _ = stop.changed() => {
                            conn.as_mut().graceful_shutdown();
                            let _ = conn.as_mut().await;
                        }
                    }
                });
            }
            _ = stop.changed() => break,
        }
    }
}
