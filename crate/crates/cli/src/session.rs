//! One complete run: backend and sandbox construction, the orchestrator,
//! and the run directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use explorer_core::config::{BackendKind, RunConfig, SandboxKind};
use explorer_core::domain::{EntryPoint, GroundTruth, SubgraphResult};
use explorer_core::extraction::{build_report, OwaspTable, Report};
use explorer_core::gateway::playbook::load_playbook;
use explorer_core::gateway::stochastic::Stochastic;
use explorer_core::gateway::wire::WireClient;
use explorer_core::gateway::{ChatBackend, Gateway};
use explorer_core::orchestrator::Engine;
use explorer_core::prompts::Prompts;
use explorer_core::sandbox::container::ContainerSandbox;
use explorer_core::sandbox::fetch::{Fetcher, HttpFetcher};
use explorer_core::sandbox::mock::MockSandbox;
use explorer_core::sandbox::Sandbox;
use explorer_core::trace::{spawn_writer, Clock, TraceEvent};
use explorer_simenv::manifest::Manifest;
use explorer_simenv::SimRouter;
use serde::{Deserialize, Serialize};

pub const TRACE_FILE: &str = "trace.jsonl";
pub const RESULTS_FILE: &str = "results.json";
pub const REPORT_FILE: &str = "report.json";
/// Inputs a replay needs that the trace does not carry.
pub const INPUTS_FILE: &str = "inputs.json";
pub const WORKSPACE_DIR: &str = "workspace";

pub fn build_backend(config: &RunConfig) -> Result<Arc<dyn ChatBackend>> {
    Ok(match config.backend.kind {
        BackendKind::Playbook => {
            let path = config.backend.playbook.as_ref().context("backend.playbook is not set")?;
            Arc::new(load_playbook(path)?)
        }
        BackendKind::Stochastic => Arc::new(Stochastic::new(config.backend.seed, config.backend.skill)),
        BackendKind::Wire => Arc::new(WireClient::from_env(
            config.backend.api_base.as_deref(),
            Duration::from_secs(config.backend.request_timeout_secs),
        )?),
    })
}

/// Mock sandboxes fetch through `fetcher` (real HTTP when `None`).
pub fn build_sandbox(config: &RunConfig, fetcher: Option<Arc<dyn Fetcher>>) -> Result<Arc<dyn Sandbox>> {
    Ok(match config.sandbox.kind {
        SandboxKind::Mock => {
            let f = fetcher.unwrap_or_else(|| Arc::new(HttpFetcher::new()));
            Arc::new(MockSandbox::new(Some(f)))
        }
        SandboxKind::Container => Arc::new(ContainerSandbox::new(
            &config.sandbox.engine,
            config.sandbox.image.clone(),
            config.sandbox.network.clone(),
        )?),
    })
}

/// Everything needed to start (or replay) a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunInputs {
    pub run_id: String,
    pub config: RunConfig,
    pub entrypoints: Vec<EntryPoint>,
    pub ground_truth: GroundTruth,
    /// When set, sandboxes reach these services in-process instead of over
    /// the network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simenv: Option<Manifest>,
}

pub struct RunOutput {
    pub results: Vec<SubgraphResult>,
    pub events: Vec<TraceEvent>,
    pub report: Report,
}

/// Files of one run below `runs/<run_id>/`.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(runs: &Path, run_id: &str) -> Self {
        RunDir { root: runs.join(run_id) }
    }

    pub fn trace(&self) -> PathBuf {
        self.root.join(TRACE_FILE)
    }

    pub fn workspace(&self) -> PathBuf {
        self.root.join(WORKSPACE_DIR)
    }
}

/// Runs the chain over every entrypoint. With a run directory, writes the
/// trace as it goes and the results, report and inputs at the end; an
/// existing trace is only replaced with `force`.
pub async fn execute(
    inputs: &RunInputs,
    dir: Option<&RunDir>,
    force: bool,
    clock: Arc<dyn Clock>,
) -> Result<RunOutput> {
    inputs.config.check()?;
    let scratch;
    let (workspace, out): (PathBuf, Option<Box<dyn std::io::Write + Send>>) = match dir {
        Some(d) => {
            if d.trace().exists() && !force {
                bail!("{} already exists (use --force to overwrite)", d.trace().display());
            }
            std::fs::create_dir_all(d.workspace()).with_context(|| format!("creating {}", d.root.display()))?;
            let f = File::create(d.trace()).with_context(|| format!("creating {}", d.trace().display()))?;
            (d.workspace(), Some(Box::new(BufWriter::new(f))))
        }
        None => {
            scratch = tempfile::tempdir()?;
            (scratch.path().to_path_buf(), None)
        }
    };
    let fetcher: Option<Arc<dyn Fetcher>> = inputs
        .simenv
        .as_ref()
        .map(|m| Arc::new(SimRouter::from_manifest(m)) as Arc<dyn Fetcher>);
    let sandbox = build_sandbox(&inputs.config, fetcher)?;
    let backend = build_backend(&inputs.config)?;
    let trace = spawn_writer(out, Arc::clone(&clock));
    let gateway = Gateway::new(backend, &inputs.config, trace.clone());
    let engine = Arc::new(Engine::new(
        inputs.run_id.clone(),
        inputs.config.clone(),
        gateway,
        sandbox,
        inputs.ground_truth.clone(),
        Prompts::default(),
        workspace,
        clock,
    ));
    let results = engine.run(&inputs.entrypoints).await;
    let events = trace.finish().await.context("flushing trace")?;
    let report = build_report(&inputs.run_id, &results, &OwaspTable::default());
    if let Some(d) = dir {
        write_json(&d.root.join(RESULTS_FILE), &results)?;
        write_json(&d.root.join(REPORT_FILE), &report)?;
        write_json(&d.root.join(INPUTS_FILE), inputs)?;
    }
    Ok(RunOutput { results, events, report })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
