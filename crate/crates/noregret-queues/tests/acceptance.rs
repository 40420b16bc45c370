//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (run with `-- --nocapture` to see them on success).
//! Statistical checks run on fixed seeds, so outcomes are reproducible.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use noregret_queues::central::{birkhoff_decompose, DoublyStochastic};
use noregret_queues::metrics::{
    self, bootstrap_se, classify_stability, weighted_norms, Classification, RegretLedger,
    SeriesKind,
};
use noregret_queues::model::SystemSpec;
use noregret_queues::params::compute_window;
use noregret_queues::scenario::{run_scenario, RunOverrides, ScenarioConfig};
use noregret_queues::sim::run_coupled;
use noregret_queues::strategies::{Exp3p, Exp3pConfig, Strategy};

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

fn load(name: &str) -> ScenarioConfig {
    ScenarioConfig::from_path(&scenario_path(name)).expect("canned scenario parses")
}

fn temp_out(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nrq_acceptance_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn run_canned(name: &str, tag: &str) -> noregret_queues::scenario::ScenarioOutcome {
    let cfg = load(name);
    run_scenario(
        &cfg,
        &RunOverrides { out_dir: Some(temp_out(tag)), jobs: Some(4), ..Default::default() },
    )
    .expect("scenario runs")
}

#[test]
fn c01_exact_coupling() {
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    let mut worst = 0u64;
    for spec_idx in 0..20 {
        let n = rng.random_range(1..=5usize);
        let m = rng.random_range(1..=5usize);
        let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
        let mu: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let spec = SystemSpec::new(lambda, mu).unwrap();
        for seed in 0..5u64 {
            let strategies: Vec<Box<dyn Strategy>> = (0..n)
                .map(|i| {
                    Box::new(Exp3p::new(
                        Exp3pConfig::new(m, 512, 0.1),
                        spec_idx * 1000 + seed * 10 + i as u64,
                    )) as Box<dyn Strategy>
                })
                .collect();
            let (s, d) = run_coupled(&spec, strategies, 10_000, seed).unwrap();
            worst = worst.max(s.coupling_max_age_diff.unwrap());
            worst = worst.max(d.coupling_max_age_diff.unwrap());
        }
    }
    assert_eq!(worst, 0, "standard and dual ages must agree exactly");
    println!("ACCEPTANCE 01 exact-coupling: PASS (max |age diff| = {worst} over 100 runs)");
}

#[test]
fn c02_potential_identity() {
    // dyadic rates keep every partial sum exact, so the layered sum and the
    // closed form must agree bit for bit
    let mut rng = ChaCha12Rng::seed_from_u64(102);
    for _ in 0..1000 {
        let n = rng.random_range(1..=10usize);
        let lambda: Vec<f64> =
            (0..n).map(|_| rng.random_range(1u32..=1 << 20) as f64 / (1u64 << 20) as f64).collect();
        let ages: Vec<u64> = (0..n).map(|_| rng.random_range(0..=50u64)).collect();
        let closed = metrics::potential(&lambda, &ages);
        let mut layered = 0.0;
        for tau in 1..=ages.iter().copied().max().unwrap_or(0) {
            for (l, &t) in lambda.iter().zip(&ages) {
                if t >= tau {
                    layered += l * (t - tau) as f64;
                }
            }
        }
        assert_eq!(closed, layered, "lambda={lambda:?} ages={ages:?}");
    }
    println!("ACCEPTANCE 02 potential-identity: PASS (1000 instances, exact)");
}

#[test]
fn c03_norm_sandwich() {
    let mut rng = ChaCha12Rng::seed_from_u64(103);
    for _ in 0..1000 {
        let n = rng.random_range(1..=12usize);
        let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..=1.0)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (l1, l2) = weighted_norms(&lambda, &x);
        let lam_min = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
        let lam_sum: f64 = lambda.iter().sum();
        // both bounds are attained exactly (n = 1, constant vectors), so a
        // few ulps of headroom absorb rounding in sqrt at the tight cases
        assert!(lam_min.sqrt() * l2 <= l1 * (1.0 + 1e-14), "left bound: {lambda:?} {x:?}");
        assert!(l1 <= lam_sum.sqrt() * l2 * (1.0 + 1e-14), "right bound: {lambda:?} {x:?}");
    }
    println!("ACCEPTANCE 03 norm-sandwich: PASS (1000 vectors, exact up to rounding at ties)");
}

#[test]
fn c04_regret_oracle_equivalence() {
    let mut rng = ChaCha12Rng::seed_from_u64(104);
    for _ in 0..100 {
        let n = rng.random_range(1..=5usize);
        let m = rng.random_range(1..=5usize);
        let w = 20u64;
        let mut ledger = RegretLedger::new(n, m, 0, w);
        let mut rows = Vec::new();
        let mut chosen = Vec::new();
        for _ in 0..w {
            let row: Vec<u8> = (0..n * m).map(|_| rng.random_range(0..=1u8)).collect();
            let cs: Vec<Option<usize>> = (0..n)
                .map(|_| {
                    if rng.random_range(0..5u8) == 0 {
                        None
                    } else {
                        Some(rng.random_range(0..m))
                    }
                })
                .collect();
            ledger.record_step(&row, &cs);
            rows.push(row);
            chosen.push(cs);
        }
        for i in 0..n {
            let brute_best = (0..m)
                .map(|j| rows.iter().map(|r| r[i * m + j] as i64).sum::<i64>())
                .max()
                .unwrap();
            let brute_realized: i64 = rows
                .iter()
                .zip(&chosen)
                .map(|(r, c)| c[i].map_or(0, |j| r[i * m + j] as i64))
                .sum();
            assert_eq!(ledger.regret(i).unwrap(), brute_best - brute_realized);
        }
    }
    println!("ACCEPTANCE 04 regret-oracle: PASS (100 windows, exact)");
}

#[test]
fn c05_birkhoff_von_neumann() {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha12Rng::seed_from_u64(105);
    let mut max_err = 0.0f64;
    let mut max_count_ratio = 0.0f64;
    for _ in 0..200 {
        let l = rng.random_range(2..=16usize);
        let perms = rng.random_range(1..l);
        let mut entries = vec![0.0; l * l];
        let mut weights: Vec<f64> = (0..perms).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        for &w in &weights {
            let mut cols: Vec<usize> = (0..l).collect();
            cols.shuffle(&mut rng);
            for (row, &col) in cols.iter().enumerate() {
                entries[row * l + col] += w;
            }
        }
        let p = DoublyStochastic::new(entries, l).unwrap();
        let d = birkhoff_decompose(&p).unwrap();
        let rec = d.reconstruct();
        for row in 0..l {
            for col in 0..l {
                max_err = max_err.max((rec[row * l + col] - p.get(row, col)).abs());
            }
        }
        let bound = (l - 1) * (l - 1) + 1;
        assert!(d.len() <= bound, "{} permutations exceeds bound {bound}", d.len());
        max_count_ratio = max_count_ratio.max(d.len() as f64 / bound as f64);
        assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert!(max_err < 1e-9, "reconstruction error {max_err}");
    println!(
        "ACCEPTANCE 05 birkhoff-von-neumann: PASS (200 matrices, max err {max_err:.2e}, worst count ratio {max_count_ratio:.2})"
    );
}

#[test]
fn c06_single_queue_baselines() {
    let bounded = run_canned("single-bounded", "c06a");
    let report = bounded.stability.as_ref().expect("50 seeds classify");
    assert_eq!(report.classification, Classification::Bounded, "exponent {}", report.exponent);

    let critical = run_canned("single-critical", "c06b");
    let crit = critical.stability.as_ref().expect("50 seeds classify");
    assert!(
        (crit.exponent - 0.5).abs() <= 0.15,
        "critical walk exponent {} outside 0.5 +/- 0.15",
        crit.exponent
    );
    println!(
        "ACCEPTANCE 06 single-queue-baselines: PASS (bounded exponent {:.3}, critical exponent {:.3})",
        report.exponent, crit.exponent
    );
}

#[test]
fn c07_central_feasibility_both_directions() {
    let feasible = run_canned("feasible-central", "c07a");
    let report = feasible.stability.as_ref().expect("30 seeds classify");
    assert_eq!(
        report.classification,
        Classification::Bounded,
        "feasible + matching scheduler must stay bounded, exponent {}",
        report.exponent
    );

    let infeasible = run_canned("infeasible-prefix", "c07b");
    let rep = infeasible.stability.as_ref().expect("30 seeds classify");
    assert_eq!(
        rep.classification,
        Classification::LinearGrowth,
        "violated prefix must grow linearly, exponent {}",
        rep.exponent
    );
    let surplus = 0.6 - 0.5;
    assert!(
        (rep.linear_slope - surplus).abs() <= 0.2 * surplus,
        "slope {} outside 20% of the prefix surplus {surplus}",
        rep.linear_slope
    );
    println!(
        "ACCEPTANCE 07 central-feasibility: PASS (bounded exponent {:.3}; infeasible slope {:.4} vs surplus {surplus})",
        report.exponent, rep.linear_slope
    );
}

#[test]
fn c08_impossibility_regime() {
    let outcome = run_canned("impossibility-125", "c08");
    let (audited, violations) = outcome.nash_audit.expect("audit enabled");
    assert!(audited >= 1000, "need at least 1000 audited steps, got {audited}");
    assert_eq!(violations, 0, "no queue may profit from deviating");

    // high-rate queue grows at lambda_1 - mu_1 / (k_low + 1) = 0.4 - 1/6
    let (times, values) =
        metrics::series_by_checkpoint(&outcome.traces, SeriesKind::QueueLen(0)).unwrap();
    let means: Vec<f64> = values.iter().map(|v| metrics::mean(v)).collect();
    let slope = metrics::fit_linear_slope(&times, &means);
    let expected = 0.4 - 1.0 / 6.0;
    assert!(
        (slope - expected).abs() <= 0.03,
        "queue 1 slope {slope} outside {expected} +/- 0.03"
    );
    println!(
        "ACCEPTANCE 08 impossibility-regime: PASS (slope {slope:.4} vs {expected:.4}; audit {violations}/{audited} violations)"
    );
}

#[test]
fn c09_half_slack_tightness() {
    let outcome = run_canned("tightness-8", "c09");
    let (times, values) =
        metrics::series_by_checkpoint(&outcome.traces, SeriesKind::TotalQueue).unwrap();
    let means: Vec<f64> = values.iter().map(|v| metrics::mean(v)).collect();
    let slope = metrics::fit_linear_slope(&times, &means);
    assert!((slope - 0.125).abs() <= 0.02, "total-packet slope {slope} outside 0.125 +/- 0.02");

    // fraction of the final 20 complete windows with zero regret for every queue
    let mut zero = 0u64;
    let mut total = 0u64;
    for trace in &outcome.traces {
        let windows = &trace.window_regrets;
        assert!(windows.len() >= 20, "expected at least 20 complete windows");
        for w in &windows[windows.len() - 20..] {
            total += 1;
            if w.regret.iter().all(|&r| r <= 0) {
                zero += 1;
            }
        }
    }
    let fraction = zero as f64 / total as f64;
    assert!(fraction >= 0.9, "zero-regret fraction {fraction} below 0.9");
    println!(
        "ACCEPTANCE 09 half-slack-tightness: PASS (slope {slope:.4}; zero-regret fraction {fraction:.3})"
    );
}

#[test]
fn c10_learning_stability() {
    let outcome = run_canned("learning-eta06", "c10");
    let eta = outcome.slack_eta.expect("system has positive slack");
    assert!((eta - 0.6).abs() < 1e-12, "slack eta {eta}");
    let ages = classify_stability(&outcome.traces, SeriesKind::TotalAge).unwrap();
    assert!(
        ages.exponent < 0.1,
        "total-age growth exponent {} must stay below 0.1",
        ages.exponent
    );

    // boundedness surrogate: queue-size mean at the horizon within three
    // bootstrap standard errors of its value at the midpoint; the error is
    // bootstrapped over the per-seed paired differences so the check stays
    // meaningful when most snapshots are empty
    let (times, values) =
        metrics::series_by_checkpoint(&outcome.traces, SeriesKind::TotalQueue).unwrap();
    let mid_idx = times.iter().position(|&t| t == 100_000).expect("checkpoint at 1e5");
    let end_idx = times.iter().position(|&t| t == 200_000).expect("checkpoint at 2e5");
    let mid_mean = metrics::mean(&values[mid_idx]);
    let end_mean = metrics::mean(&values[end_idx]);
    let diffs: Vec<f64> =
        values[end_idx].iter().zip(&values[mid_idx]).map(|(e, m)| e - m).collect();
    let se = bootstrap_se(&diffs, 200, 0xC10);
    assert!(
        (end_mean - mid_mean).abs() <= 3.0 * se,
        "|{end_mean} - {mid_mean}| exceeds 3 se = {}",
        3.0 * se
    );
    println!(
        "ACCEPTANCE 10 learning-stability: PASS (age exponent {:.3}; Q mean {:.3} -> {:.3}, 3se {:.3})",
        ages.exponent,
        mid_mean,
        end_mean,
        3.0 * se
    );
}

#[test]
fn c11_window_calculator() {
    let specs: Vec<SystemSpec> = vec![
        SystemSpec::new(vec![0.2, 0.1], vec![1.0, 0.8]).unwrap(),
        SystemSpec::new(vec![0.3], vec![0.9]).unwrap(),
        SystemSpec::new(vec![0.3, 0.2, 0.1], vec![0.9, 0.8, 0.7, 0.6, 0.5]).unwrap(),
        SystemSpec::new(vec![0.15, 0.12, 0.1, 0.08, 0.05], vec![1.0, 0.9, 0.8]).unwrap(),
        SystemSpec::new(vec![0.25, 0.2, 0.15, 0.1], vec![1.0, 0.9, 0.8, 0.7]).unwrap(),
    ];
    let etas = [0.9, 0.6, 0.3, 0.1];
    let mut checked = 0;
    for spec in &specs {
        for &eta in &etas {
            let p = compute_window(spec, eta).unwrap();
            // independent re-evaluation of the three requirements
            let n = spec.n() as f64;
            let m = spec.m() as f64;
            let mu1 = spec.mu()[0];
            let delta = eta / 8.0;
            let epsilon = delta * mu1 / (4.0 * n);
            assert_eq!(p.delta, delta);
            assert_eq!(p.epsilon, epsilon);
            for (i, &l) in spec.lambda().iter().enumerate() {
                assert_eq!(p.epsilon_i[i], epsilon / l);
            }
            let holds = |w: u64| {
                let wf = w as f64;
                let phi = (wf * (m * wf / (eta / (128.0 * n))).ln()).sqrt();
                let regret = n * phi + n <= wf * delta * mu1 / 4.0;
                let geom = 6.0 * n * (-epsilon * epsilon * wf / 36.0).exp() <= eta / 128.0;
                let bern = m * (-delta * delta * wf * mu1 / 2.0).exp() <= eta / 128.0;
                regret && geom && bern
            };
            assert!(holds(p.w), "returned window fails substitution: w={}", p.w);
            if p.w > 1 {
                assert!(!holds(p.w / 2), "window not minimal: w={}", p.w);
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 20);
    println!("ACCEPTANCE 11 window-calculator: PASS (20 spec/eta pairs, exact substitution)");
}

#[test]
fn c12_determinism_serial_vs_parallel() {
    let cfg = load("learning-eta06");
    let base = RunOverrides {
        seeds: Some(4),
        horizon: Some(3_000),
        ..Default::default()
    };
    let dir_serial = temp_out("c12_serial");
    let dir_parallel = temp_out("c12_parallel");
    let dir_repeat = temp_out("c12_repeat");
    run_scenario(
        &cfg,
        &RunOverrides { out_dir: Some(dir_serial.clone()), jobs: Some(1), ..base.clone() },
    )
    .unwrap();
    run_scenario(
        &cfg,
        &RunOverrides { out_dir: Some(dir_parallel.clone()), jobs: Some(4), ..base.clone() },
    )
    .unwrap();
    run_scenario(
        &cfg,
        &RunOverrides { out_dir: Some(dir_repeat.clone()), jobs: Some(2), ..base },
    )
    .unwrap();
    let mut compared = 0;
    for entry in std::fs::read_dir(&dir_serial).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(dir_serial.join(&name)).unwrap();
        let b = std::fs::read(dir_parallel.join(&name)).unwrap();
        let c = std::fs::read(dir_repeat.join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs between serial and parallel");
        assert_eq!(a, c, "{name:?} differs between repeats");
        compared += 1;
    }
    assert!(compared >= 4, "expected per-seed artifacts, compared {compared}");
    println!("ACCEPTANCE 12 determinism: PASS ({compared} files byte-identical across 3 runs)");
}
