//! The standard engine tracks full queue contents; the dual engine tracks
//! only each queue's oldest timestamp and draws a geometric gap when a packet
//! clears. Driven from one random source they produce identical ages at every
//! step, and the dual side's implied queue sizes match the standard ones.
//!
//! ```text
//! cargo run --example coupled_engines
//! ```

use noregret_queues::model::SystemSpec;
use noregret_queues::sim::run_coupled;
use noregret_queues::strategies::{Exp3p, Exp3pConfig, Strategy};

fn main() {
    let spec = SystemSpec::new(vec![0.5, 0.3], vec![0.6, 0.4]).unwrap();
    let strategies: Vec<Box<dyn Strategy>> = (0..spec.n())
        .map(|i| {
            Box::new(Exp3p::new(Exp3pConfig::new(spec.m(), 512, 0.1), i as u64))
                as Box<dyn Strategy>
        })
        .collect();

    let horizon = 20_000;
    let (standard, dual) = run_coupled(&spec, strategies, horizon, 42).unwrap();

    println!(
        "coupled run over {horizon} steps: max |standard age - dual age| = {}",
        standard.coupling_max_age_diff.unwrap()
    );
    println!("\n  t       standard q,age      dual q,age");
    for (s, d) in standard.checkpoints.iter().zip(&dual.checkpoints) {
        if s.t >= 1000 {
            println!(
                "  {:>6}   {:?} {:?}    {:?} {:?}",
                s.t, s.q, s.age, d.q, d.age
            );
        }
    }
}
