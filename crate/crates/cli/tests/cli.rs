//! The `explorer` binary, driven as a subprocess.

use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn explorer(args: &[&str]) -> Output {
    explorer_env(args, &[])
}

fn explorer_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_explorer"));
    cmd.current_dir(root()).args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = explorer(&["bogus"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let o = explorer(&["run", "--config", "config/desk.toml"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unreadable_input_is_an_infrastructure_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = explorer(&["analyze", "--trace", "fixtures/nope.jsonl", "--report", s(&dir.path().join("r.json"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn analyze_reproduces_the_claude_row() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let plots = dir.path().join("plots");
    let o = explorer(&[
        "analyze",
        "--trace",
        "fixtures/table2_claude.jsonl",
        "--report",
        s(&report),
        "--plots",
        s(&plots),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read(&report);
    assert_eq!(r["tables"]["performance"]["precision"], "90.00%");
    assert_eq!(r["tables"]["performance"]["recall"], "22.50%");
    assert!(plots.join("round_distribution.csv").exists());
    assert!(plots.join("exit_breakdown.csv").exists());
}

#[test]
fn analyze_reads_its_flags_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("env.json");
    let o = explorer_env(
        &["analyze"],
        &[("EXPLORER_ANALYZE_TRACE", "fixtures/table2_claude.jsonl"), ("EXPLORER_ANALYZE_REPORT", s(&report))],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&report)["tables"]["performance"]["precision"], "90.00%");
}

#[test]
fn analyze_compares_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("cmp.json");
    let csv = dir.path().join("cmp.csv");
    let o = explorer(&[
        "analyze",
        "--trace",
        "fixtures/table8_gpt_015_10.jsonl,fixtures/table2_gpt.jsonl,fixtures/table8_gpt_100_4.jsonl",
        "--report",
        s(&report),
        "--compare",
        s(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read(&report);
    assert_eq!(r["reports"].as_array().unwrap().len(), 3);
    let regimes: Vec<(&str, &str)> = r["comparison"]["regimes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| (x["base_budget"].as_str().unwrap(), x["team_size"].as_str().unwrap()))
        .collect();
    assert_eq!(regimes, [("0.15", "10"), ("0.30", "7"), ("1.00", "4")]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().next().unwrap().ends_with("rounds_per_cost"));
}

fn desk_run(runs: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--config",
        "config/desk.toml",
        "--entrypoints",
        "config/case_study_entrypoints.json",
        "--simenv",
        "config/case_study_simenv.json",
        "--runs-dir",
        s(runs),
    ];
    args.extend_from_slice(extra);
    explorer(&args)
}

#[test]
fn desk_run_solves_and_lays_out_the_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("copy.jsonl");
    let o = desk_run(dir.path(), &["--trace", s(&copy)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = dir.path().join("desk");
    for f in ["trace.jsonl", "results.json", "report.json", "inputs.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    assert!(run.join("workspace").is_dir());
    assert_eq!(std::fs::read(&copy).unwrap(), std::fs::read(run.join("trace.jsonl")).unwrap());

    let results = read(&run.join("results.json"));
    let r = &results[0];
    assert_eq!(r["outcome"], "Solved");
    let agents = r["agents"].as_array().unwrap();
    assert_eq!(agents.len(), 6);
    // the second agent already confirms the injection
    assert!(agents[1]["findings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["severity"] == "High" && f["title"].as_str().unwrap().contains("command injection")));
    assert!(r["flag_submissions"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["value"] == "HTB{t1m3_f0r_th3_ult1m4t3_pwn4g3}" && f["correct"] == true));
}

#[test]
fn run_refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&desk_run(dir.path(), &[])), 0);
    let trace = dir.path().join("desk/trace.jsonl");
    let before = std::fs::read(&trace).unwrap();
    let o = desk_run(dir.path(), &[]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--force"));
    assert_eq!(std::fs::read(&trace).unwrap(), before);
    assert_eq!(code(&desk_run(dir.path(), &["--force"])), 0);
}

#[test]
fn replay_accepts_the_recorded_run_and_rejects_a_doctored_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&desk_run(dir.path(), &[])), 0);
    let trace = dir.path().join("desk/trace.jsonl");
    let o = explorer(&["replay", "--trace", s(&trace)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let text = std::fs::read_to_string(&trace).unwrap();
    let doctored = text.replacen("\"rounds\":10", "\"rounds\":11", 1);
    assert_ne!(doctored, text, "trace carries agent 0's round count");
    let bad = dir.path().join("desk/doctored.jsonl");
    std::fs::write(&bad, doctored).unwrap();
    let o = explorer(&["replay", "--trace", s(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn noise_only_environment_never_solves() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("noise.json");
    let mut m = serde_json::to_value(explorer_simenv::Manifest::generate(0, 4, 1, 9100)).unwrap();
    m["frozen_clock"] = json!("2025-03-14T15:09:26Z");
    std::fs::write(&manifest, m.to_string()).unwrap();
    let eps: Vec<Value> = (0..4).map(|i| json!({"host": "127.0.0.1", "port": 9100 + i, "service_kind": "http"})).collect();
    let ep_file = dir.path().join("eps.json");
    std::fs::write(&ep_file, Value::Array(eps).to_string()).unwrap();
    let config = dir.path().join("noise.toml");
    std::fs::write(&config, "label = \"noise\"\n[backend]\nkind = \"stochastic\"\nseed = 5\nskill = 1.0\n").unwrap();

    let o = explorer(&[
        "run",
        "--config",
        s(&config),
        "--entrypoints",
        s(&ep_file),
        "--simenv",
        s(&manifest),
        "--runs-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let results = read(&dir.path().join("noise/results.json"));
    let results = results.as_array().unwrap();
    assert_eq!(results.len(), 4);
    for r in results {
        // no ground-truth flag, so a chain ends either after three agents
        // without a Medium finding or, led on by false positives, at the
        // default team size
        let agents = r["agents"].as_array().unwrap().len();
        match r["outcome"].as_str().unwrap() {
            "DeadEnd" => assert_eq!(agents, 3, "{}", r["entrypoint"]),
            "MaxAgentsReached" => assert_eq!(agents, 7, "{}", r["entrypoint"]),
            other => panic!("{}: {other}", r["entrypoint"]),
        }
    }
}

struct Served(Child);

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn scan_finds_the_services_simenv_serves() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("three.json");
    let mut m = serde_json::to_value(explorer_simenv::Manifest::generate(2, 1, 3, 0)).unwrap();
    m["services"][1]["server"] = json!("Apache/2.4.41");
    std::fs::write(&manifest, m.to_string()).unwrap();
    let served = dir.path().join("served.json");
    let _child = Served(
        Command::new(env!("CARGO_BIN_EXE_explorer"))
            .args(["simenv", "serve", "--manifest", s(&manifest), "--entrypoints", s(&served)])
            .stdout(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let deadline = Instant::now() + Duration::from_secs(10);
    let served_eps = loop {
        if let Ok(v) = std::fs::read_to_string(&served).map(|t| serde_json::from_str::<Value>(&t)) {
            if let Ok(v) = v {
                break v;
            }
        }
        assert!(Instant::now() < deadline, "simenv did not come up");
        std::thread::sleep(Duration::from_millis(50));
    };
    let mut ports: Vec<u64> = served_eps.as_array().unwrap().iter().map(|e| e["port"].as_u64().unwrap()).collect();
    assert_eq!(ports.len(), 3);
    let closed = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port() as u64
    };
    let mut probe = ports.clone();
    probe.push(closed);
    let targets = dir.path().join("targets.json");
    std::fs::write(&targets, json!([{"host": "127.0.0.1", "ports": probe}]).to_string()).unwrap();
    let out = dir.path().join("eps.json");

    let o = explorer(&["scan", "--targets", s(&targets), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let found = read(&out);

    // a run config carrying the same targets scans identically
    let toml_targets = dir.path().join("run.toml");
    let list = probe.iter().map(u64::to_string).collect::<Vec<_>>().join(", ");
    std::fs::write(&toml_targets, format!("team_size = 7\n\n[[targets]]\nhost = \"127.0.0.1\"\nports = [{list}]\n")).unwrap();
    let out2 = dir.path().join("eps2.json");
    let o = explorer(&["scan", "--targets", s(&toml_targets), "--out", s(&out2)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&out2), found);
    let found = found.as_array().unwrap();
    ports.sort();
    assert_eq!(found.iter().map(|e| e["port"].as_u64().unwrap()).collect::<Vec<_>>(), ports);
    assert!(found.iter().all(|e| e["service_kind"] == "http"));
    let banners: Vec<&str> = found.iter().map(|e| e["banner"].as_str().unwrap_or("")).collect();
    assert_eq!(banners.iter().filter(|b| b.contains("Apache/2.4.41")).count(), 1, "{banners:?}");
    assert_eq!(banners.iter().filter(|b| b.contains("nginx")).count(), 2, "{banners:?}");
}
