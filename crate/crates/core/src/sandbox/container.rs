//! Container-engine sandbox over the engine's HTTP API.
//!
//! Speaks the small subset needed: create, start, exec (create/start/inspect)
//! and remove. The engine is reached over a unix socket (`unix:///path`) or
//! plain TCP (`http://host:port`); each request uses its own connection.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use chrono::Utc;
use http_body_util::{BodyExt, Full};
use hyper::body::Bytes;
use hyper::{Method, Request, StatusCode};
use hyper_util::rt::TokioIo;
use serde_json::{json, Value};

use super::{BackendKind, ExecResult, Sandbox, SandboxError, SandboxHandle};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Unix(PathBuf),
    Tcp(String),
}

impl Endpoint {
    pub fn parse(s: &str) -> Result<Endpoint, SandboxError> {
        if let Some(p) = s.strip_prefix("unix://") {
            Ok(Endpoint::Unix(PathBuf::from(p)))
        } else if let Some(h) = s.strip_prefix("http://").or_else(|| s.strip_prefix("tcp://")) {
            Ok(Endpoint::Tcp(h.trim_end_matches('/').to_string()))
        } else {
            Err(SandboxError::EngineUnreachable(format!("unsupported engine endpoint {s:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineClient {
    endpoint: Endpoint,
}

impl EngineClient {
    pub fn new(endpoint: Endpoint) -> Self {
        EngineClient { endpoint }
    }

    async fn send(&self, method: Method, path: &str, body: Option<Value>) -> Result<(StatusCode, Bytes), SandboxError> {
        let unreachable = |e: &dyn std::fmt::Display| SandboxError::EngineUnreachable(e.to_string());
        let payload = body.map(|b| b.to_string()).unwrap_or_default();
        let mut builder = Request::builder()
            .method(method)
            .uri(path)
            .header("Host", "docker");
        if !payload.is_empty() {
            builder = builder.header("Content-Type", "application/json");
        }
        let req = builder
            .body(Full::new(Bytes::from(payload)))
            .map_err(|e| SandboxError::Engine(e.to_string()))?;
        let resp = match &self.endpoint {
            Endpoint::Tcp(addr) => {
                let stream = tokio::net::TcpStream::connect(addr).await.map_err(|e| unreachable(&e))?;
                roundtrip(TokioIo::new(stream), req).await?
            }
            #[cfg(unix)]
            Endpoint::Unix(p) => {
                let stream = tokio::net::UnixStream::connect(p).await.map_err(|e| unreachable(&e))?;
                roundtrip(TokioIo::new(stream), req).await?
            }
            #[cfg(not(unix))]
            Endpoint::Unix(_) => return Err(unreachable(&"unix sockets unsupported on this platform")),
        };
        Ok(resp)
    }

    async fn json(&self, method: Method, path: &str, body: Option<Value>) -> Result<(StatusCode, Value), SandboxError> {
        let (status, bytes) = self.send(method, path, body).await?;
        let v = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()))
        };
        Ok((status, v))
    }
}

async fn roundtrip<T>(io: TokioIo<T>, req: Request<Full<Bytes>>) -> Result<(StatusCode, Bytes), SandboxError>
where
    T: tokio::io::AsyncRead + tokio::io::AsyncWrite + Unpin + Send + 'static,
{
    let (mut sender, conn) = hyper::client::conn::http1::handshake(io)
        .await
        .map_err(|e| SandboxError::EngineUnreachable(e.to_string()))?;
    tokio::spawn(async move {
        let _ = conn.await;
    });
    let resp = sender
        .send_request(req)
        .await
        .map_err(|e| SandboxError::Engine(e.to_string()))?;
    let status = resp.status();
    let body = resp
        .into_body()
        .collect()
        .await
        .map_err(|e| SandboxError::Engine(e.to_string()))?
        .to_bytes();
    Ok((status, body))
}

/// Splits the engine's multiplexed exec stream into stdout and stderr.
/// Frames are `[stream, 0, 0, 0, len_be32] payload`; stream 1 is stdout,
/// 2 is stderr. Non-multiplexed input is treated as stdout.
pub fn demux(raw: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut i = 0;
    while i + 8 <= raw.len() {
        let kind = raw[i];
        if !(kind <= 2 && raw[i + 1..i + 4] == [0, 0, 0]) {
            return (raw.to_vec(), Vec::new());
        }
        let len = u32::from_be_bytes([raw[i + 4], raw[i + 5], raw[i + 6], raw[i + 7]]) as usize;
        let end = (i + 8 + len).min(raw.len());
        match kind {
            2 => err.extend_from_slice(&raw[i + 8..end]),
            _ => out.extend_from_slice(&raw[i + 8..end]),
        }
        i = end;
    }
    if i < raw.len() && i == 0 {
        return (raw.to_vec(), Vec::new());
    }
    (out, err)
}

pub struct ContainerSandbox {
    client: EngineClient,
    image: String,
    network: Option<String>,
}

impl ContainerSandbox {
    pub fn new(engine: &str, image: impl Into<String>, network: Option<String>) -> Result<Self, SandboxError> {
        Ok(ContainerSandbox {
            client: EngineClient::new(Endpoint::parse(engine)?),
            image: image.into(),
            network,
        })
    }

    fn engine_error(status: StatusCode, body: &Value) -> SandboxError {
        let msg = body
            .get("message")
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| body.to_string());
        SandboxError::Engine(format!("{status}: {msg}"))
    }

    async fn run_exec(&self, id: &str, command: &str) -> Result<(i64, Vec<u8>, Vec<u8>), SandboxError> {
        let (status, v) = self
            .client
            .json(
                Method::POST,
                &format!("/containers/{id}/exec"),
                Some(json!({"AttachStdout": true, "AttachStderr": true, "Tty": false,
                            "Cmd": ["sh", "-c", command]})),
            )
            .await?;
        if status == StatusCode::NOT_FOUND || status == StatusCode::CONFLICT {
            return Err(SandboxError::SandboxGone(id.to_string()));
        }
        if !status.is_success() {
            return Err(Self::engine_error(status, &v));
        }
        let exec_id = v
            .get("Id")
            .and_then(Value::as_str)
            .ok_or_else(|| SandboxError::Engine("exec create returned no Id".into()))?
            .to_string();
        let (status, raw) = self
            .client
            .send(
                Method::POST,
                &format!("/exec/{exec_id}/start"),
                Some(json!({"Detach": false, "Tty": false})),
            )
            .await?;
        if !status.is_success() {
            return Err(SandboxError::Engine(format!("exec start: {status}")));
        }
        let (out, err) = demux(&raw);
        let (status, v) = self.client.json(Method::GET, &format!("/exec/{exec_id}/json"), None).await?;
        if !status.is_success() {
            return Err(Self::engine_error(status, &v));
        }
        let code = v.get("ExitCode").and_then(Value::as_i64).unwrap_or(-1);
        Ok((code, out, err))
    }
}

#[async_trait]
impl Sandbox for ContainerSandbox {
    async fn create(&self, owner: &str, workspace: &Path) -> Result<SandboxHandle, SandboxError> {
        std::fs::create_dir_all(workspace).map_err(|e| SandboxError::Workspace(e.to_string()))?;
        let ws = std::fs::canonicalize(workspace).map_err(|e| SandboxError::Workspace(e.to_string()))?;
        let mut host_config = json!({"Binds": [format!("{}:/workspace", ws.display())]});
        if let Some(n) = &self.network {
            host_config["NetworkMode"] = json!(n);
        }
        let body = json!({
            "Image": self.image,
            "Cmd": ["sleep", "infinity"],
            "WorkingDir": "/workspace",
            "Labels": {"explorer.owner": owner},
            "HostConfig": host_config,
        });
        let (status, v) = self.client.json(Method::POST, "/containers/create", Some(body)).await?;
        if status == StatusCode::NOT_FOUND {
            return Err(SandboxError::ImageMissing(self.image.clone()));
        }
        if !status.is_success() {
            return Err(Self::engine_error(status, &v));
        }
        let id = v
            .get("Id")
            .and_then(Value::as_str)
            .ok_or_else(|| SandboxError::Engine("create returned no Id".into()))?
            .to_string();
        let (status, v) = self.client.json(Method::POST, &format!("/containers/{id}/start"), None).await?;
        if !(status.is_success() || status == StatusCode::NOT_MODIFIED) {
            let _ = self.client.send(Method::DELETE, &format!("/containers/{id}?force=true"), None).await;
            return Err(Self::engine_error(status, &v));
        }
        Ok(SandboxHandle {
            sandbox_id: id,
            workspace_path: workspace.to_path_buf(),
            created_at: Utc::now(),
            backend_kind: BackendKind::Container,
        })
    }

    async fn exec(&self, handle: &SandboxHandle, command: &str, timeout: Duration) -> Result<ExecResult, SandboxError> {
        let start = Instant::now();
        match tokio::time::timeout(timeout, self.run_exec(&handle.sandbox_id, command)).await {
            Ok(r) => {
                let (code, out, err) = r?;
                Ok(ExecResult::new(code, out, err, start.elapsed()))
            }
            Err(_) => Ok(ExecResult::timeout(timeout, start.elapsed())),
        }
    }

    async fn destroy(&self, handle: &SandboxHandle) {
        let path = format!("/containers/{}?force=true&v=true", handle.sandbox_id);
        match self.client.send(Method::DELETE, &path, None).await {
            Ok((s, _)) if s.is_success() || s == StatusCode::NOT_FOUND => {}
            Ok((s, _)) => tracing::warn!(sandbox = %handle.sandbox_id, status = %s, "container remove failed"),
            Err(e) => tracing::warn!(sandbox = %handle.sandbox_id, error = %e, "container remove failed"),
        }
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Container
    }
}
