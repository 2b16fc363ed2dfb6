//! Per-agent execution environments.
//!
//! [`mock::MockSandbox`] keeps an in-memory filesystem and routes `curl` to a
//! [`fetch::Fetcher`]; [`container::ContainerSandbox`] drives a container
//! engine over its HTTP API. Each agent gets a fresh sandbox and destroys it
//! on exit; evidence lives in the host workspace and survives.

pub mod container;
pub mod fetch;
pub mod mock;

use std::path::{Path, PathBuf};
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use container::ContainerSandbox;
pub use fetch::{FetchError, FetchRequest, FetchResponse, Fetcher, HttpFetcher};
pub use mock::MockSandbox;

/// Per-stream output cap.
pub const OUTPUT_CAP: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Container,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandboxHandle {
    pub sandbox_id: String,
    /// Host directory holding this agent's evidence.
    pub workspace_path: PathBuf,
    pub created_at: DateTime<Utc>,
    pub backend_kind: BackendKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecResult {
    pub exit_code: i64,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub duration: Duration,
    pub stdout_truncated: bool,
    pub stderr_truncated: bool,
    pub timed_out: bool,
}

impl ExecResult {
    pub fn new(exit_code: i64, stdout: Vec<u8>, stderr: Vec<u8>, duration: Duration) -> Self {
        let (stdout, stdout_truncated) = cap_stream(stdout);
        let (stderr, stderr_truncated) = cap_stream(stderr);
        ExecResult {
            exit_code,
            stdout,
            stderr,
            duration,
            stdout_truncated,
            stderr_truncated,
            timed_out: false,
        }
    }

    pub fn timeout(after: Duration, duration: Duration) -> Self {
        let mut r = ExecResult::new(
            -1,
            Vec::new(),
            format!("{TIMEOUT_MARKER} after {}s\n", after.as_secs_f64()).into_bytes(),
            duration,
        );
        r.timed_out = true;
        r
    }

    /// Stdout followed by stderr, lossily decoded, as the model sees it.
    pub fn combined(&self) -> String {
        let mut s = String::from_utf8_lossy(&self.stdout).into_owned();
        if !self.stderr.is_empty() {
            if !s.is_empty() && !s.ends_with('\n') {
                s.push('\n');
            }
            s.push_str(&String::from_utf8_lossy(&self.stderr));
        }
        s
    }
}

pub const TRUNCATION_MARKER: &str = "[output truncated";
pub const TIMEOUT_MARKER: &str = "[command timed out";

/// Caps a stream at [`OUTPUT_CAP`] bytes, appending a marker iff cut.
pub fn cap_stream(mut bytes: Vec<u8>) -> (Vec<u8>, bool) {
    if bytes.len() <= OUTPUT_CAP {
        return (bytes, false);
    }
    let dropped = bytes.len() - OUTPUT_CAP;
    bytes.truncate(OUTPUT_CAP);
    bytes.extend_from_slice(format!("\n{TRUNCATION_MARKER}: {dropped} bytes omitted]\n").as_bytes());
    (bytes, true)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SandboxError {
    #[error("container engine unreachable: {0}")]
    EngineUnreachable(String),
    #[error("tool image missing: {0}")]
    ImageMissing(String),
    #[error("sandbox {0} is gone")]
    SandboxGone(String),
    #[error("engine error: {0}")]
    Engine(String),
    #[error("workspace: {0}")]
    Workspace(String),
}

#[async_trait]
pub trait Sandbox: Send + Sync {
    /// Starts a fresh environment for `owner` with `workspace` as its
    /// evidence directory (created if needed).
    async fn create(&self, owner: &str, workspace: &Path) -> Result<SandboxHandle, SandboxError>;

    async fn exec(&self, handle: &SandboxHandle, command: &str, timeout: Duration) -> Result<ExecResult, SandboxError>;

    /// Idempotent; failures are logged, never returned.
    async fn destroy(&self, handle: &SandboxHandle);

    fn kind(&self) -> BackendKind;
}

/// Resolves `relative` under `root`, rejecting absolute paths and `..`.
pub fn resolve_within(root: &Path, relative: &str) -> Result<PathBuf, SandboxError> {
    let p = Path::new(relative);
    if relative.trim().is_empty() {
        return Err(SandboxError::Workspace("empty path".into()));
    }
    if p.is_absolute()
        || p.components().any(|c| !matches!(c, std::path::Component::Normal(_) | std::path::Component::CurDir))
    {
        return Err(SandboxError::Workspace(format!(
            "{relative:?} must be a relative path inside the workspace"
        )));
    }
    Ok(root.join(p))
}
