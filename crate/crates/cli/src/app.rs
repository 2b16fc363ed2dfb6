//! Command-line surface and subcommand handlers.
//!
//! Every flag falls back to an `EXPLORER_*` environment variable. Usage
//! errors exit with 2 (clap's default), failures with 1.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use explorer_analytics::report::{write_comparison_csv, write_plots};
use explorer_analytics::{analyze, compare, AnalysisReport, MilestoneOracle};
use explorer_core::domain::{EntryPoint, GroundTruth};
use explorer_core::extraction::OwaspTable;
use explorer_core::recon::{scan, ScanTarget};
use explorer_core::trace::{read_trace, EventBody, SystemClock, TraceEvent, TraceSink};
use explorer_simenv::manifest::Manifest;
use serde::Deserialize;
use serde_json::json;

use crate::session::{execute, read_json, write_json, RunDir, RunInputs, INPUTS_FILE, RESULTS_FILE};
use crate::settings::{load_config, toml_to_json};

#[derive(Debug, Parser)]
#[command(name = "explorer", version, about = "Multi-agent penetration-testing harness")]
pub struct Cli {
    /// Log filter for stderr diagnostics (tracing env-filter syntax).
    #[arg(long, global = true, env = "EXPLORER_LOG", default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discover entrypoints on the given hosts and ports.
    Scan(ScanArgs),
    /// Simulated target environment.
    Simenv {
        #[command(subcommand)]
        command: SimenvCommand,
    },
    /// Explore every entrypoint with agent chains.
    Run(RunArgs),
    /// Compute metrics and tables from one or more traces.
    Analyze(AnalyzeArgs),
    /// Re-execute a recorded run and check the trace matches.
    Replay(ReplayArgs),
}

#[derive(Debug, Subcommand)]
pub enum SimenvCommand {
    /// Serve the services in a manifest until interrupted.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// JSON list of scan targets, or a JSON/TOML document (such as a run
    /// config) with a `targets` list.
    #[arg(long, env = "EXPLORER_SCAN_TARGETS")]
    pub targets: PathBuf,
    #[arg(long, env = "EXPLORER_SCAN_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "EXPLORER_SIMENV_MANIFEST")]
    pub manifest: PathBuf,
    /// Writes the bound services as entrypoints once listening.
    #[arg(long, env = "EXPLORER_SIMENV_ENTRYPOINTS")]
    pub entrypoints: Option<PathBuf>,
    /// Writes the derived ground-truth manifest once listening.
    #[arg(long, env = "EXPLORER_SIMENV_GROUND_TRUTH")]
    pub ground_truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, env = "EXPLORER_RUN_CONFIG")]
    pub config: PathBuf,
    #[arg(long, env = "EXPLORER_RUN_ENTRYPOINTS")]
    pub entrypoints: PathBuf,
    /// Extra copy of the trace outside the run directory.
    #[arg(long, env = "EXPLORER_RUN_TRACE")]
    pub trace: Option<PathBuf>,
    /// Extra copy of the results outside the run directory.
    #[arg(long, env = "EXPLORER_RUN_RESULTS")]
    pub results: Option<PathBuf>,
    /// Parent of `<run_id>/`.
    #[arg(long, env = "EXPLORER_RUNS_DIR", default_value = "runs")]
    pub runs_dir: PathBuf,
    /// Defaults to the config label, else a timestamp.
    #[arg(long, env = "EXPLORER_RUN_ID")]
    pub run_id: Option<String>,
    /// Ground-truth manifest; overrides the config's `ground_truth`.
    #[arg(long, env = "EXPLORER_RUN_GROUND_TRUTH")]
    pub ground_truth: Option<PathBuf>,
    /// Serve this simenv manifest in-process instead of reaching the
    /// entrypoints over the network.
    #[arg(long, env = "EXPLORER_RUN_SIMENV")]
    pub simenv: Option<PathBuf>,
    /// Replace an existing trace.
    #[arg(long, env = "EXPLORER_RUN_FORCE")]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// One or more traces; several produce a side-by-side comparison.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',', env = "EXPLORER_ANALYZE_TRACE")]
    pub trace: Vec<PathBuf>,
    #[arg(long, env = "EXPLORER_ANALYZE_ORACLE")]
    pub oracle: Option<PathBuf>,
    /// Ground-truth manifest used to score flag submissions.
    #[arg(long, env = "EXPLORER_ANALYZE_MANIFEST")]
    pub manifest: Option<PathBuf>,
    /// OWASP keyword table; the shipped table when unset.
    #[arg(long, env = "EXPLORER_ANALYZE_OWASP")]
    pub owasp: Option<PathBuf>,
    #[arg(long, env = "EXPLORER_ANALYZE_REPORT")]
    pub report: PathBuf,
    /// Directory for CSV/JSON plot series.
    #[arg(long, env = "EXPLORER_ANALYZE_PLOTS")]
    pub plots: Option<PathBuf>,
    /// Regime comparison CSV (several traces).
    #[arg(long, env = "EXPLORER_ANALYZE_COMPARE")]
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long, env = "EXPLORER_REPLAY_TRACE")]
    pub trace: PathBuf,
    /// Recorded inputs; `inputs.json` beside the trace when unset.
    #[arg(long, env = "EXPLORER_REPLAY_INPUTS")]
    pub inputs: Option<PathBuf>,
}

pub async fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scan(a) => cmd_scan(a).await,
        Command::Simenv { command: SimenvCommand::Serve(a) } => cmd_serve(a).await,
        Command::Run(a) => cmd_run(a).await,
        Command::Analyze(a) => cmd_analyze(a),
        Command::Replay(a) => cmd_replay(a).await,
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TargetsFile {
    List(Vec<ScanTarget>),
    Wrapped { targets: Vec<ScanTarget> },
}

async fn cmd_scan(a: ScanArgs) -> Result<()> {
    let parsed: TargetsFile = if a.targets.extension().is_some_and(|e| e == "toml") {
        let text = std::fs::read_to_string(&a.targets).with_context(|| format!("reading {}", a.targets.display()))?;
        let doc = toml_to_json(toml::from_str(&text).with_context(|| format!("parsing {}", a.targets.display()))?);
        serde_json::from_value(doc).with_context(|| format!("no targets list in {}", a.targets.display()))?
    } else {
        read_json(&a.targets)?
    };
    let targets = match parsed {
        TargetsFile::List(t) | TargetsFile::Wrapped { targets: t } => t,
    };
    for t in &targets {
        t.validate()?;
    }
    let eps = scan(&targets, &TraceSink::disabled()).await;
    write_json(&a.out, &eps)?;
    for ep in &eps {
        println!("{}\t{:?}\t{}", ep.key(), ep.service_kind, ep.banner.as_deref().unwrap_or(""));
    }
    Ok(())
}

async fn cmd_serve(a: ServeArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let handle = explorer_simenv::serve(manifest).await?;
    if let Some(p) = &a.ground_truth {
        write_json(p, &handle.ground_truth())?;
    }
    if let Some(p) = &a.entrypoints {
        write_json(p, &handle.entrypoints())?;
    }
    for (i, s) in handle.manifest().services.iter().enumerate() {
        println!("{}\t{:?}", handle.url(i), s.kind);
    }
    tokio::signal::ctrl_c().await.context("waiting for interrupt")?;
    handle.shutdown().await;
    Ok(())
}

fn default_run_id() -> String {
    let t = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).unwrap_or_default();
    format!("run-{}-{:03}", t.as_secs(), t.subsec_millis())
}

async fn cmd_run(a: RunArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    let entrypoints: Vec<EntryPoint> = read_json(&a.entrypoints)?;
    if entrypoints.is_empty() {
        bail!("{} lists no entrypoints", a.entrypoints.display());
    }
    let simenv = a.simenv.as_deref().map(Manifest::load).transpose()?;
    let ground_truth = match (a.ground_truth.as_ref().or(config.ground_truth.as_ref()), &simenv) {
        (Some(p), _) => GroundTruth::load(p)?,
        (None, Some(m)) => {
            let ports: Vec<u16> = m.services.iter().map(|s| s.port).collect();
            m.ground_truth(&ports)
        }
        (None, None) => {
            tracing::warn!("no ground truth configured; every flag will be scored wrong");
            GroundTruth::default()
        }
    };
    let run_id = a.run_id.clone().or_else(|| config.label.clone()).unwrap_or_else(default_run_id);
    for extra in [&a.trace, &a.results].into_iter().flatten() {
        if extra.exists() && !a.force {
            bail!("{} already exists (use --force to overwrite)", extra.display());
        }
    }
    let dir = RunDir::new(&a.runs_dir, &run_id);
    let inputs = RunInputs { run_id, config, entrypoints, ground_truth, simenv };
    let out = execute(&inputs, Some(&dir), a.force, Arc::new(SystemClock)).await?;
    if let Some(p) = &a.trace {
        std::fs::copy(dir.trace(), p).with_context(|| format!("copying trace to {}", p.display()))?;
    }
    if let Some(p) = &a.results {
        std::fs::copy(dir.root.join(RESULTS_FILE), p).with_context(|| format!("copying results to {}", p.display()))?;
    }
    for r in &out.results {
        println!(
            "{}\t{:?}\tagents={}\trounds={}\tcost={}",
            r.entrypoint.key(),
            r.outcome,
            r.agents.len(),
            r.total_rounds,
            r.total_cost
        );
    }
    println!("run directory: {}", dir.root.display());
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let manifest = a.manifest.as_deref().map(GroundTruth::load).transpose()?;
    let oracle = a.oracle.as_deref().map(MilestoneOracle::load).transpose()?;
    let owasp = match &a.owasp {
        Some(p) => OwaspTable::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => OwaspTable::default(),
    };
    let mut reports: Vec<AnalysisReport> = Vec::new();
    for path in &a.trace {
        let events = read_trace(path).with_context(|| format!("reading {}", path.display()))?;
        let r = analyze(&events, manifest.as_ref(), oracle.as_ref(), &owasp)
            .with_context(|| format!("analyzing {}", path.display()))?;
        let p = &r.tables.performance;
        println!(
            "{}\t{}\tfound={} correct={} wrong={} precision={} recall={} agents={}",
            path.display(),
            r.model,
            p.found,
            p.correct,
            p.wrong,
            p.precision,
            p.recall,
            p.agents
        );
        reports.push(r);
    }
    if let [single] = reports.as_slice() {
        write_json(&a.report, single)?;
    } else {
        write_json(&a.report, &json!({ "reports": reports, "comparison": compare(&reports) }))?;
    }
    if let Some(dir) = &a.plots {
        for (i, r) in reports.iter().enumerate() {
            let sub = if reports.len() == 1 { dir.clone() } else { dir.join(format!("{i:02}")) };
            write_plots(r, &sub).with_context(|| format!("writing plots to {}", sub.display()))?;
        }
    }
    if let Some(p) = &a.compare {
        write_comparison_csv(&compare(&reports), p).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

/// Reduces a trace to what must replay identically: timestamps, sequence
/// numbers and measured durations are dropped, and events are grouped per
/// entrypoint (concurrent subgraphs interleave freely) in emission order.
pub fn replay_view(events: &[TraceEvent]) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for e in events {
        let mut body = e.body.clone();
        if let EventBody::ToolExec(t) = &mut body {
            t.duration_ms = 0;
        }
        let key = body.entrypoint_key().unwrap_or_default();
        let line = serde_json::to_string(&body).expect("event bodies serialize");
        out.entry(key).or_default().push(line);
    }
    out
}

async fn cmd_replay(a: ReplayArgs) -> Result<()> {
    let recorded = read_trace(&a.trace).with_context(|| format!("reading {}", a.trace.display()))?;
    let inputs_path = a
        .inputs
        .clone()
        .unwrap_or_else(|| a.trace.parent().unwrap_or(Path::new(".")).join(INPUTS_FILE));
    let inputs: RunInputs = read_json(&inputs_path)?;
    let out = execute(&inputs, None, false, Arc::new(SystemClock)).await?;
    let (want, got) = (replay_view(&recorded), replay_view(&out.events));
    if want != got {
        let diverged = want
            .keys()
            .chain(got.keys())
            .find(|k| want.get(*k) != got.get(*k))
            .cloned()
            .unwrap_or_default();
        let scope = if diverged.is_empty() { "run-level events".to_string() } else { diverged };
        bail!("replay diverged from {} in {scope}", a.trace.display());
    }
    println!("replay matches: {} events", recorded.len());
    Ok(())
}
