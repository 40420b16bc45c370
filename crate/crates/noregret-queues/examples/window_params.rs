//! The window calculator: from the slack eta, derive the confidence and
//! deviation parameters and the smallest power-of-two window for which the
//! regret budget and both concentration requirements hold.
//!
//! ```text
//! cargo run --example window_params
//! ```

use noregret_queues::model::{max_slack, SystemSpec};
use noregret_queues::params::{compute_window, compute_window_with, RegretForm};

fn main() {
    let spec = SystemSpec::new(vec![0.2, 0.1], vec![1.0, 0.8]).unwrap();
    let eta = max_slack(&spec).eta.unwrap();
    println!("system: lambda {:?}, mu {:?}, slack eta = {eta}", spec.lambda(), spec.mu());

    let params = compute_window(&spec, eta).unwrap();
    println!("\n{params}");

    println!("window shrinks as the slack grows:");
    for eta in [0.1, 0.3, 0.6, 0.9] {
        match compute_window(&spec, eta) {
            Ok(p) => println!("  eta = {eta:<4} -> w = 2^{}", p.w.trailing_zeros()),
            Err(e) => println!("  eta = {eta:<4} -> {e}"),
        }
    }

    // the regret-bound shape is pluggable; a linear bound works only if its
    // slope undercuts the per-window budget delta*mu_1/(4n)
    fn linear_fraction(w: u64, _arms: usize, _delta: f64) -> f64 {
        w as f64 / 256.0
    }
    let alt = compute_window_with(&spec, eta, RegretForm::Custom(linear_fraction)).unwrap();
    println!("\nwith a w/256 regret bound instead: w = {}", alt.w);
}
