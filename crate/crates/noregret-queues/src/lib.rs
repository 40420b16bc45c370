//! Discrete-time queueing games where decentralized queues learn which server
//! to send to.
//!
//! Queues receive packets at Bernoulli rates and compete for servers that
//! succeed at Bernoulli rates; unserved packets return and are resent. The
//! crate provides:
//!
//! - system validation, prefix-sum feasibility, and the half-rate slack
//!   margin ([`model`]);
//! - a centralized randomized-matching scheduler built from majorization and
//!   Birkhoff-von Neumann decomposition ([`central`]);
//! - three step-exact engines (priority, no-priority, and the
//!   deferred-decision dual that tracks only oldest timestamps) plus a
//!   coupling harness that drives standard and dual from one random source
//!   ([`sim`]);
//! - pluggable per-queue policies, including EXP3.P with an exploration floor
//!   and per-window freezing, and the coordinated equilibrium schedule for
//!   the no-priority counterexample family ([`strategies`]);
//! - windowed regret ledgers, age potentials, weighted norms, and an
//!   empirical growth classifier ([`metrics`]);
//! - the window-length calculator tying the learning guarantee to the slack
//!   ([`params`]);
//! - declarative TOML scenarios with deterministic multi-seed orchestration
//!   ([`scenario`]).
//!
//! Runnable walkthroughs live in `examples/`; the `noregret-queues` binary
//! wraps scenario execution, window reports, and the quick verification
//! suite.

pub mod central;
pub mod csvio;
pub mod metrics;
pub mod model;
pub mod params;
mod rng;
pub mod scenario;
pub mod sim;
pub mod strategies;

pub use model::{check_feasibility, max_slack, preprocess, SystemSpec};
pub use scenario::{run_learning_scenario, run_scenario, RunOverrides, ScenarioConfig};
pub use sim::{run_coupled, run_single, EngineModel, Policy, RunConfig, RunTrace};
