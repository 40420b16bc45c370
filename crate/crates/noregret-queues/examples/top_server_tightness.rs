//! The half-rate boundary: a family sitting just past the slack condition
//! where camping on the rate-1 server is zero-regret on almost every growing
//! window, yet the total backlog climbs by 1/n per step.
//!
//! ```text
//! cargo run --example top_server_tightness
//! ```

use noregret_queues::metrics::{self, SeriesKind};
use noregret_queues::model::max_slack;
use noregret_queues::sim::{run_single, EngineModel, Policy, RunConfig, WindowSchedule};
use noregret_queues::strategies::{tightness_spec, top_server_strategy, Strategy};

fn main() {
    let n = 8;
    let spec = tightness_spec(n);
    println!(
        "n = {n}: lambda_i = {:.6}, mu = (1, {:.6}, ...)",
        spec.lambda()[0],
        spec.mu()[1]
    );
    println!("slack report: {:?}", max_slack(&spec));

    let strategies: Vec<Box<dyn Strategy>> =
        (0..n).map(|_| Box::new(top_server_strategy()) as Box<dyn Strategy>).collect();
    let mut cfg = RunConfig::new(EngineModel::Standard, 100_000);
    cfg.windows = Some(WindowSchedule::Squares);
    let trace = run_single(&spec, Policy::PerQueue(strategies), &cfg, 11).unwrap();

    println!("\nwindowed regret (window k has length k^2):");
    for w in trace.window_regrets.iter().rev().take(10).rev() {
        let max_regret = w.regret.iter().max().unwrap();
        println!(
            "  window {:>3} len {:>5}: worst queue regret {max_regret:>3}, realized {:?}",
            w.index + 1,
            w.len,
            w.realized
        );
    }

    let (times, values) =
        metrics::series_by_checkpoint(&[trace], SeriesKind::TotalQueue).unwrap();
    let means: Vec<f64> = values.iter().map(|v| metrics::mean(v)).collect();
    println!(
        "\ntotal backlog slope {:.4} vs sum(lambda) - 1 = {:.4}",
        metrics::fit_linear_slope(&times, &means),
        (n as f64 + 1.0) / (n as f64) - 1.0
    );
}
