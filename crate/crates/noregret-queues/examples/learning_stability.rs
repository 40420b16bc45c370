//! EXP3.P learners on a system with half-rate slack: queue lengths and ages
//! stay bounded even though the queues compete selfishly for servers.
//!
//! ```text
//! cargo run --example learning_stability
//! ```

use noregret_queues::metrics::{self, SeriesKind};
use noregret_queues::model::{max_slack, SystemSpec};
use noregret_queues::scenario::{RunOverrides, ScenarioConfig};

const CONFIG: &str = r#"
schema_version = 1
name = "learning-demo"
model = "standard"
horizon = 50000
seeds = 10
base_seed = 77
window = 2048

[system]
lambda = [0.2, 0.1]
mu = [1.0, 0.8]

[strategy]
kind = "exp3p"
delta = 0.05
freezing = true
"#;

fn main() {
    let spec = SystemSpec::new(vec![0.2, 0.1], vec![1.0, 0.8]).unwrap();
    let slack = max_slack(&spec);
    println!("slack eta = {:?} (guarantee applies when positive)", slack.eta);

    let cfg = ScenarioConfig::from_toml(CONFIG).unwrap();
    let out_dir = std::env::temp_dir().join("nrq_example_learning");
    let outcome = noregret_queues::run_learning_scenario(
        &cfg,
        &RunOverrides { out_dir: Some(out_dir.clone()), jobs: Some(4), ..Default::default() },
    )
    .unwrap();

    let (times, values) =
        metrics::series_by_checkpoint(&outcome.traces, SeriesKind::TotalAge).unwrap();
    println!("\nmean total age across seeds:");
    for (t, vals) in times.iter().zip(&values) {
        if *t >= 100 {
            println!("  t={t:>6}  {:.3}", metrics::mean(vals));
        }
    }
    println!("\ngrowth exponent: {:.4}", outcome.exponent);
    println!("per-window regret rows and traces written to {}", out_dir.display());
}
