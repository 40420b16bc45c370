//! The centralized pipeline: shrink service rates until they majorize the
//! arrivals, express the transfer as a doubly stochastic matrix, peel it into
//! a distribution over matchings, and sample from it.
//!
//! ```text
//! cargo run --example central_scheduler
//! ```

use noregret_queues::central::{
    birkhoff_decompose, build_central_scheduler, sample_matching, scale_to_majorization,
    transfer_matrix, DoublyStochastic,
};
use noregret_queues::model::SystemSpec;
use rand::SeedableRng;

fn main() {
    let spec = SystemSpec::new(vec![0.6, 0.3], vec![0.9, 0.5]).unwrap();

    let shrunk = scale_to_majorization(spec.mu(), spec.lambda()).unwrap();
    println!("mu {:?} shrunk to {:?} (now majorizes lambda)", spec.mu(), shrunk);

    let p = transfer_matrix(&shrunk, spec.lambda()).unwrap();
    println!("transfer matrix (P * shrunk = lambda):");
    for row in 0..p.size() {
        let cells: Vec<String> =
            (0..p.size()).map(|col| format!("{:.4}", p.get(row, col))).collect();
        println!("  [{}]", cells.join(", "));
    }

    let dist = build_central_scheduler(&spec).unwrap();
    println!("\nscheduler: {} matchings", dist.len());
    for (perm, w) in dist.permutations().iter().zip(dist.weights()) {
        println!("  weight {w:.4}: queue->server {perm:?}");
    }
    let service = dist.expected_service(&spec.padded_mu());
    println!("expected service {service:?} vs arrivals {:?}", spec.lambda());

    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
    let draws: Vec<&[usize]> = (0..5).map(|_| sample_matching(&dist, &mut rng)).collect();
    println!("five sampled matchings: {draws:?}");

    // decomposition of an arbitrary doubly stochastic matrix
    let flat = DoublyStochastic::new(vec![0.25; 16], 4).unwrap();
    let d = birkhoff_decompose(&flat).unwrap();
    println!("\nuniform 4x4 matrix peels into {} permutations", d.len());
}
