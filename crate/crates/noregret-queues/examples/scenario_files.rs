//! Driving experiments from declarative scenario files: parse, execute a few
//! seeds, and read the emitted artifacts.
//!
//! ```text
//! cargo run --example scenario_files
//! ```

use noregret_queues::scenario::{list_scenarios, run_scenario, RunOverrides, ScenarioConfig};
use std::path::Path;

fn main() {
    let dir = Path::new("scenarios");
    if !dir.is_dir() {
        eprintln!("run from the repository root (no ./scenarios directory here)");
        std::process::exit(1);
    }
    println!("canned scenarios:");
    for (name, path) in list_scenarios(dir).unwrap() {
        println!("  {name:<20} {}", path.display());
    }

    let cfg = ScenarioConfig::from_path(&dir.join("feasible-central.toml")).unwrap();
    let out_dir = std::env::temp_dir().join("nrq_example_scenario");
    let outcome = run_scenario(
        &cfg,
        &RunOverrides {
            seeds: Some(5),
            horizon: Some(20_000),
            out_dir: Some(out_dir.clone()),
            jobs: Some(4),
        },
    )
    .unwrap();

    println!("\n{}", outcome.summary_text());
    println!("artifacts under {}:", out_dir.display());
    let mut names: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in names {
        println!("  {name}");
    }
}
