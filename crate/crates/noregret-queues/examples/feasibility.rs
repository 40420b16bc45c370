//! System validation, preprocessing, feasibility, and the slack margin.
//!
//! ```text
//! cargo run --example feasibility
//! ```

use noregret_queues::model::{
    check_feasibility, feasibility, max_slack, preprocess, SystemSpec,
};

fn main() {
    // rates are sorted on construction; a shared prefix of rate-1 queues and
    // servers cancels out in preprocessing
    let raw = SystemSpec::new(vec![1.0, 0.3, 0.6], vec![0.5, 1.0, 0.9]).unwrap();
    println!("sorted lambda: {:?}", raw.lambda());
    println!("sorted mu:     {:?}", raw.mu());
    let spec = preprocess(&raw).unwrap();
    println!("after preprocessing: lambda {:?}, mu {:?}", spec.lambda(), spec.mu());

    println!("\nfeasibility is a strict prefix-sum comparison:");
    for (lambda, mu) in [
        (vec![0.6, 0.3], vec![0.9, 0.5]),
        (vec![0.6, 0.1], vec![0.5, 0.5]),
        (vec![0.5, 0.3], vec![0.8, 0.0]),
    ] {
        let s = SystemSpec::new(lambda.clone(), mu.clone()).unwrap();
        println!("  lambda {lambda:?} vs mu {mu:?} -> {:?}", feasibility(&s));
    }

    println!("\nslack eta: how much margin remains if service rates were halved");
    for (lambda, mu) in [
        (vec![0.2, 0.1], vec![1.0, 0.8]),
        (vec![0.5], vec![1.0]),
        (vec![0.6], vec![1.0]),
    ] {
        let s = SystemSpec::new(lambda.clone(), mu.clone()).unwrap();
        let report = max_slack(&s);
        println!(
            "  lambda {lambda:?} vs mu {mu:?} -> feasible={} eta={:?} violating_prefix={:?}",
            check_feasibility(&s),
            report.eta,
            report.violating_prefix
        );
    }
}
