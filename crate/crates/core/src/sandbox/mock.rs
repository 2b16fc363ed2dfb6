//! In-process sandbox with a virtual filesystem and a small command table.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use chrono::Utc;

use super::fetch::{FetchRequest, Fetcher};
use super::{BackendKind, ExecResult, Sandbox, SandboxError, SandboxHandle};

#[derive(Debug, Default)]
struct State {
    files: BTreeMap<String, Vec<u8>>,
    workspace: PathBuf,
}

pub struct MockSandbox {
    fetcher: Option<Arc<dyn Fetcher>>,
    live: Mutex<HashMap<String, State>>,
    created: Mutex<HashMap<String, u32>>,
}

impl MockSandbox {
    pub fn new(fetcher: Option<Arc<dyn Fetcher>>) -> Self {
        MockSandbox {
            fetcher,
            live: Mutex::new(HashMap::new()),
            created: Mutex::new(HashMap::new()),
        }
    }

    /// Places a file in the sandbox's virtual filesystem.
    pub fn plant(&self, handle: &SandboxHandle, path: &str, content: &[u8]) -> Result<(), SandboxError> {
        let mut live = self.live.lock().expect("mock sandbox lock");
        let st = live
            .get_mut(&handle.sandbox_id)
            .ok_or_else(|| SandboxError::SandboxGone(handle.sandbox_id.clone()))?;
        st.files.insert(path.to_string(), content.to_vec());
        Ok(())
    }

    pub fn live_count(&self) -> usize {
        self.live.lock().expect("mock sandbox lock").len()
    }

    fn with_state<T>(&self, id: &str, f: impl FnOnce(&mut State) -> T) -> Result<T, SandboxError> {
        let mut live = self.live.lock().expect("mock sandbox lock");
        live.get_mut(id)
            .map(f)
            .ok_or_else(|| SandboxError::SandboxGone(id.to_string()))
    }

    async fn run(&self, id: &str, command: &str) -> Result<(i64, Vec<u8>, Vec<u8>), SandboxError> {
        let argv = match shell_words::split(command) {
            Ok(a) => a,
            Err(e) => return Ok((2, Vec::new(), format!("sh: 1: Syntax error: {e}\n").into_bytes())),
        };
        let Some(prog) = argv.first().cloned() else {
            return Ok((0, Vec::new(), Vec::new()));
        };
        let args = &argv[1..];
        let name = prog.rsplit('/').next().unwrap_or(&prog).to_string();
        match name.as_str() {
            "true" => Ok((0, Vec::new(), Vec::new())),
            "false" => Ok((1, Vec::new(), Vec::new())),
            "pwd" => Ok((0, b"/workspace\n".to_vec(), Vec::new())),
            "echo" => Ok((0, format!("{}\n", args.join(" ")).into_bytes(), Vec::new())),
            "sleep" => {
                let secs: f64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0.0);
                tokio::time::sleep(Duration::from_secs_f64(secs.max(0.0))).await;
                Ok((0, Vec::new(), Vec::new()))
            }
            "cat" => self.with_state(id, |st| {
                let mut out = Vec::new();
                let mut err = Vec::new();
                let mut code = 0;
                for p in args {
                    match read_file(st, p) {
                        Some(b) => out.extend_from_slice(&b),
                        None => {
                            code = 1;
                            err.extend_from_slice(format!("cat: {p}: No such file or directory\n").as_bytes());
                        }
                    }
                }
                (code, out, err)
            }),
            "ls" => self.with_state(id, |st| {
                let dir = args.iter().find(|a| !a.starts_with('-')).map(String::as_str).unwrap_or("/");
                let prefix = if dir.ends_with('/') { dir.to_string() } else { format!("{dir}/") };
                let mut names: Vec<String> = st
                    .files
                    .keys()
                    .filter_map(|k| k.strip_prefix(&prefix))
                    .map(|rest| rest.split('/').next().unwrap_or(rest).to_string())
                    .collect();
                names.dedup();
                let mut out = names.join("\n");
                if !out.is_empty() {
                    out.push('\n');
                }
                (0, out.into_bytes(), Vec::new())
            }),
            "curl" => Ok(self.curl(args).await),
            _ => Ok((127, Vec::new(), format!("sh: 1: {prog}: not found\n").into_bytes())),
        }
    }

    async fn curl(&self, args: &[String]) -> (i64, Vec<u8>, Vec<u8>) {
        let mut req = FetchRequest::get("");
        let mut include_head = false;
        let mut timeout = Duration::from_secs(30);
        let mut url = None;
        let mut it = args.iter();
        while let Some(a) = it.next() {
            match a.as_str() {
                "-i" | "--include" => include_head = true,
                "-X" | "--request" => {
                    if let Some(m) = it.next() {
                        req.method = m.to_ascii_uppercase();
                    }
                }
                "-H" | "--header" => {
                    if let Some((k, v)) = it.next().and_then(|h| h.split_once(':')) {
                        req.headers.insert(k.trim().to_string(), v.trim().to_string());
                    }
                }
                "-d" | "--data" | "--data-raw" | "--data-binary" => {
                    req.body = it.next().cloned();
                    if req.method == "GET" {
                        req.method = "POST".into();
                    }
                }
                "-m" | "--max-time" => {
                    if let Some(s) = it.next().and_then(|s| s.parse::<f64>().ok()) {
                        timeout = Duration::from_secs_f64(s.max(0.001));
                    }
                }
                s if s.starts_with('-') => {}
                s => {
                    if url.is_none() {
                        url = Some(s.to_string());
                    }
                }
            }
        }
        let Some(url) = url else {
            return (2, Vec::new(), b"curl: no URL specified\n".to_vec());
        };
        req.url = url;
        let Some(fetcher) = &self.fetcher else {
            return (7, Vec::new(), b"curl: (7) network unavailable in this sandbox\n".to_vec());
        };
        match fetcher.fetch(req, timeout).await {
            Ok(resp) => (0, resp.render(include_head), Vec::new()),
            Err(e) => (e.curl_exit_code(), Vec::new(), format!("curl: ({}) {e}\n", e.curl_exit_code()).into_bytes()),
        }
    }
}

fn read_file(st: &State, path: &str) -> Option<Vec<u8>> {
    if let Some(b) = st.files.get(path) {
        return Some(b.clone());
    }
    let rel = path.strip_prefix("/workspace/")?;
    let host = super::resolve_within(&st.workspace, rel).ok()?;
    std::fs::read(host).ok()
}

#[async_trait]
impl Sandbox for MockSandbox {
    async fn create(&self, owner: &str, workspace: &Path) -> Result<SandboxHandle, SandboxError> {
        std::fs::create_dir_all(workspace).map_err(|e| SandboxError::Workspace(e.to_string()))?;
        let id = {
            let mut created = self.created.lock().expect("mock sandbox lock");
            let n = created.entry(owner.to_string()).or_insert(0);
            *n += 1;
            if *n == 1 {
                format!("mock-{owner}")
            } else {
                format!("mock-{owner}-{n}")
            }
        };
        self.live.lock().expect("mock sandbox lock").insert(
            id.clone(),
            State {
                files: BTreeMap::new(),
                workspace: workspace.to_path_buf(),
            },
        );
        Ok(SandboxHandle {
            sandbox_id: id,
            workspace_path: workspace.to_path_buf(),
            created_at: Utc::now(),
            backend_kind: BackendKind::Mock,
        })
    }

    async fn exec(&self, handle: &SandboxHandle, command: &str, timeout: Duration) -> Result<ExecResult, SandboxError> {
        self.with_state(&handle.sandbox_id, |_| ())?;
        let start = Instant::now();
        match tokio::time::timeout(timeout, self.run(&handle.sandbox_id, command)).await {
            Ok(r) => {
                let (code, out, err) = r?;
                Ok(ExecResult::new(code, out, err, start.elapsed()))
            }
            Err(_) => Ok(ExecResult::timeout(timeout, start.elapsed())),
        }
    }

    async fn destroy(&self, handle: &SandboxHandle) {
        self.live.lock().expect("mock sandbox lock").remove(&handle.sandbox_id);
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }
}
