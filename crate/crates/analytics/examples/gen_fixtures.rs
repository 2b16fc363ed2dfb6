//! Regenerates the shipped fixture traces.
//!
//! `cargo run -p explorer-analytics --example gen_fixtures [-- <dir>]`

use std::path::PathBuf;

use explorer_analytics::synth::{build_fixture, fixture_plans, milestone_fixture, MilestoneProfile};
use explorer_core::trace::to_jsonl;

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));
    std::fs::create_dir_all(&dir)?;
    for plan in fixture_plans() {
        let path = dir.join(format!("{}.jsonl", plan.name));
        std::fs::write(&path, to_jsonl(&build_fixture(&plan)))?;
        println!("{}", path.display());
    }
    for p in MilestoneProfile::ALL {
        let path = dir.join(format!("milestones_{}.jsonl", p.name()));
        std::fs::write(&path, to_jsonl(&milestone_fixture(p)))?;
        println!("{}", path.display());
    }
    Ok(())
}
