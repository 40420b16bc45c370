//! Without timestamps, servers picking uniformly among senders let many
//! low-rate queues starve the one high-rate queue, even though every step is
//! a Nash equilibrium and the system is centrally feasible with lots of room.
//!
//! ```text
//! cargo run --example no_priority_collapse
//! ```

use noregret_queues::metrics::{self, SeriesKind};
use noregret_queues::model::check_feasibility;
use noregret_queues::sim::{run_single, EngineModel, Policy, RunConfig};
use noregret_queues::strategies::{impossibility_spec, make_nash_coordinator};

fn main() {
    let n_root = 5;
    let spec = impossibility_spec(n_root);
    println!(
        "family with n = {} queues/servers: lambda_1 = {}, lambda_low = {}, mu_1 = {}, mu_low = {}",
        spec.n(),
        spec.lambda()[0],
        spec.lambda()[1],
        spec.mu()[0],
        spec.mu()[1]
    );
    println!("centrally feasible: {}", check_feasibility(&spec));

    let coordinator = make_nash_coordinator(&spec, n_root).unwrap();
    println!("coordinator sends {} low queues to the top server", coordinator.k_low());

    let mut cfg = RunConfig::new(EngineModel::NoPriority, 10_000);
    cfg.nash_audit_samples = Some(500);
    let trace = run_single(&spec, Policy::Nash(coordinator), &cfg, 4).unwrap();

    let audit = trace.nash_audit.unwrap();
    println!(
        "nash audit: {} violations over {} sampled steps",
        audit.violations, audit.audited
    );

    let (times, values) =
        metrics::series_by_checkpoint(&[trace], SeriesKind::QueueLen(0)).unwrap();
    println!("\nhigh-rate queue backlog:");
    for (t, vals) in times.iter().zip(&values) {
        if *t >= 100 {
            println!("  t={t:>6}  Q1={}", vals[0]);
        }
    }
    let means: Vec<f64> = values.iter().map(|v| metrics::mean(v)).collect();
    println!(
        "\ngrowth slope {:.4} vs lambda_1 - mu_1/3 = {:.4}",
        metrics::fit_linear_slope(&times, &means),
        0.4 - 0.5 / 3.0
    );
}
