//! CSV emission with documented, stable headers. Queue and server indices are
//! 1-based in every file; an empty `chosen` field means the queue did not
//! send. Float fields use Rust's shortest round-trip formatting, so identical
//! runs serialize to identical bytes.

use std::fmt::Write as _;

use crate::metrics::StabilityReport;
use crate::sim::RunTrace;

/// Header: `t,queue,q,age,chosen,cleared`. One row per (checkpoint, queue);
/// the final checkpoint records the post-run state with no step taken.
pub fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::from("t,queue,q,age,chosen,cleared\n");
    for c in &trace.checkpoints {
        for i in 0..trace.n {
            let chosen = match c.chosen[i] {
                Some(j) => (j + 1).to_string(),
                None => String::new(),
            };
            writeln!(
                out,
                "{},{},{},{},{},{}",
                c.t,
                i + 1,
                c.q[i],
                c.age[i],
                chosen,
                u8::from(c.cleared[i])
            )
            .unwrap();
        }
    }
    out
}

/// Header: `window,start_t,len,queue,regret,realized,best_fixed`.
pub fn regret_csv(trace: &RunTrace) -> String {
    let mut out = String::from("window,start_t,len,queue,regret,realized,best_fixed\n");
    for w in &trace.window_regrets {
        for i in 0..trace.n {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                w.index,
                w.start,
                w.len,
                i + 1,
                w.regret[i],
                w.realized[i],
                w.best_fixed[i]
            )
            .unwrap();
        }
    }
    out
}

/// Header: `ell,t,phi,z,queue,tau`. One row per (window boundary, queue).
pub fn potential_csv(trace: &RunTrace) -> String {
    let mut out = String::from("ell,t,phi,z,queue,tau\n");
    for p in &trace.potentials {
        for (i, &tau) in p.tau.iter().enumerate() {
            writeln!(out, "{},{},{},{},{},{}", p.ell, p.t, p.phi, p.z, i + 1, tau).unwrap();
        }
    }
    out
}

/// Header: `t,mean,m2,m4,se_mean,se_m2,se_m4`. One row per checkpoint,
/// moments taken across seeds.
pub fn stability_csv(report: &StabilityReport) -> String {
    let mut out = String::from("t,mean,m2,m4,se_mean,se_m2,se_m4\n");
    for m in &report.moments {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            m.t, m.mean, m.m2, m.m4, m.se_mean, m.se_m2, m.se_m4
        )
        .unwrap();
    }
    out
}

/// Header: `series,seeds,horizon,exponent,linear_slope,classification`.
pub fn report_csv(report: &StabilityReport) -> String {
    let mut out = String::from("series,seeds,horizon,exponent,linear_slope,classification\n");
    writeln!(
        out,
        "{},{},{},{},{},{}",
        report.series.label(),
        report.seeds,
        report.horizon,
        report.exponent,
        report.linear_slope,
        report.classification.as_str()
    )
    .unwrap();
    out
}
