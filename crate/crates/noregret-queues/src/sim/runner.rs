//! Multi-step drivers: checkpointed runs of a single engine, the exact
//! standard/dual coupling harness, window bookkeeping for regret and
//! potential snapshots, and the per-step Nash audit hook.

use rand_chacha::ChaCha12Rng;

use crate::central::{sample_matching, MatchingDistribution};
use crate::metrics::{potential, RegretLedger};
use crate::model::SystemSpec;
use crate::rng::{sub_rng, Role};
use crate::sim::{
    step_dual, step_no_priority, step_standard, DualState, SimError, SimStreams, StandardState,
    StepOutcome,
};
use crate::strategies::{nash_audit_step, NashCoordinator, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineModel {
    Standard,
    Dual,
    NoPriority,
}

impl EngineModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            EngineModel::Standard => "standard",
            EngineModel::Dual => "dual",
            EngineModel::NoPriority => "no_priority",
        }
    }
}

/// Regret/potential window layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSchedule {
    /// Consecutive windows of a fixed length.
    Fixed(u64),
    /// Window k (1-based) has length k^2.
    Squares,
}

impl WindowSchedule {
    fn len_of(&self, index: u64) -> u64 {
        match self {
            WindowSchedule::Fixed(w) => *w,
            WindowSchedule::Squares => (index + 1) * (index + 1),
        }
    }
}

/// How the queues pick servers each step.
pub enum Policy {
    /// One independent learner per queue; sends whenever it holds a packet.
    PerQueue(Vec<Box<dyn Strategy>>),
    /// Centralized randomized matching; queues matched to virtual servers idle.
    Central { dist: MatchingDistribution, rng: ChaCha12Rng },
    /// Coordinated equilibrium play for the no-priority model.
    Nash(NashCoordinator),
}

impl Policy {
    pub fn central(dist: MatchingDistribution, seed: u64) -> Policy {
        Policy::Central { dist, rng: sub_rng(seed, Role::Central, 0) }
    }

    fn choices(&mut self, t: u64, ages: &[Option<u64>], m: usize) -> Vec<Option<usize>> {
        match self {
            Policy::PerQueue(strategies) => ages
                .iter()
                .enumerate()
                .map(|(i, age)| age.map(|a| strategies[i].choose(t, a)))
                .collect(),
            Policy::Central { dist, rng } => {
                let matching = sample_matching(dist, rng);
                ages.iter()
                    .enumerate()
                    .map(|(i, age)| match age {
                        Some(_) => {
                            let j = matching.get(i).copied().unwrap_or(usize::MAX);
                            if j < m {
                                Some(j)
                            } else {
                                None // matched to a virtual server: idle
                            }
                        }
                        None => None,
                    })
                    .collect()
            }
            Policy::Nash(coordinator) => {
                let has_packet: Vec<bool> = ages.iter().map(|a| a.is_some()).collect();
                coordinator.choices(&has_packet)
            }
        }
    }

    fn feedback(&mut self, outcome: &StepOutcome) {
        if let Policy::PerQueue(strategies) = self {
            for (i, chosen) in outcome.chosen.iter().enumerate() {
                if let Some(j) = chosen {
                    strategies[i]
                        .feedback(*j, outcome.cleared[i])
                        .expect("choose/feedback pairing is maintained by the runner");
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: EngineModel,
    pub horizon: u64,
    pub checkpoints: Vec<u64>,
    pub windows: Option<WindowSchedule>,
    /// Evenly spread sample count for the per-step Nash audit.
    pub nash_audit_samples: Option<u64>,
}

impl RunConfig {
    pub fn new(model: EngineModel, horizon: u64) -> Self {
        RunConfig {
            model,
            horizon,
            checkpoints: log8_checkpoints(horizon),
            windows: None,
            nash_audit_samples: None,
        }
    }
}

/// Log-spaced checkpoint times floor(10^(k/8)) up to the horizon, plus the
/// horizon itself.
pub fn log8_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let t = if k.is_multiple_of(8) {
            10u64.checked_pow(k / 8).unwrap_or(u64::MAX)
        } else {
            (10f64.powf(f64::from(k) / 8.0) * (1.0 + 1e-12)).floor() as u64
        };
        if t > horizon {
            break;
        }
        out.push(t);
        k += 1;
    }
    out.push(horizon);
    out.sort_unstable();
    out.dedup();
    out
}

/// State snapshot at a checkpoint time, plus the step taken there (absent at
/// the final checkpoint, which records the post-run state).
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub t: u64,
    /// Queue sizes at the beginning of step t, before arrivals.
    pub q: Vec<u64>,
    /// Decision-time ages at step t.
    pub age: Vec<u64>,
    pub chosen: Vec<Option<usize>>,
    pub cleared: Vec<bool>,
}

/// Potential snapshot at a window boundary.
#[derive(Debug, Clone)]
pub struct PotentialPoint {
    pub ell: u64,
    pub t: u64,
    pub phi: f64,
    pub z: f64,
    /// End-of-window ages measured from the window start (zero when the queue
    /// cleared everything received before the window).
    pub tau: Vec<u64>,
}

/// Per-window regret summary for every queue.
#[derive(Debug, Clone)]
pub struct WindowRegret {
    pub index: u64,
    pub start: u64,
    pub len: u64,
    pub regret: Vec<i64>,
    pub realized: Vec<u64>,
    pub best_fixed: Vec<u64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NashAuditSummary {
    pub audited: u64,
    pub violations: u64,
}

/// Everything recorded from one seeded run.
pub struct RunTrace {
    pub model: EngineModel,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub horizon: u64,
    pub checkpoints: Vec<Checkpoint>,
    pub potentials: Vec<PotentialPoint>,
    pub window_regrets: Vec<WindowRegret>,
    pub nash_audit: Option<NashAuditSummary>,
    /// Maximum |standard age - dual age| observed; populated by coupled runs.
    pub coupling_max_age_diff: Option<u64>,
}

impl RunTrace {
    pub fn checkpoint_at(&self, t: u64) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.t == t)
    }
}

enum EngineState {
    Standard(StandardState),
    Dual(DualState),
}

impl EngineState {
    fn decision_ages(&mut self, streams: &mut SimStreams) -> Vec<Option<u64>> {
        match self {
            EngineState::Standard(s) => s.decision_ages(streams),
            EngineState::Dual(s) => s.decision_ages(streams),
        }
    }

    fn q_sizes(&mut self, streams: &mut SimStreams) -> Vec<u64> {
        match self {
            EngineState::Standard(s) => s.q_sizes().to_vec(),
            EngineState::Dual(s) => s.implied_q(streams),
        }
    }

    fn step(
        &mut self,
        streams: &mut SimStreams,
        choices: &[Option<usize>],
        model: EngineModel,
    ) -> Result<StepOutcome, SimError> {
        match (self, model) {
            (EngineState::Standard(s), EngineModel::Standard) => {
                step_standard(s, streams, choices)
            }
            (EngineState::Standard(s), EngineModel::NoPriority) => {
                step_no_priority(s, streams, choices)
            }
            (EngineState::Dual(s), EngineModel::Dual) => step_dual(s, streams, choices),
            _ => unreachable!("engine state matches model"),
        }
    }
}

struct TraceBuilder {
    cfg: RunConfig,
    lambda: Vec<f64>,
    checkpoints: Vec<Checkpoint>,
    potentials: Vec<PotentialPoint>,
    window_regrets: Vec<WindowRegret>,
    window_index: u64,
    window_start: u64,
    /// Start of the window that ended at the current boundary.
    prev_window_start: u64,
    ledger: Option<RegretLedger>,
    audit_times: Vec<u64>,
    audit: NashAuditSummary,
    pending_checkpoint: Option<(u64, Vec<u64>, Vec<u64>)>,
}

impl TraceBuilder {
    fn new(cfg: RunConfig, spec: &SystemSpec) -> Self {
        let audit_times = match cfg.nash_audit_samples {
            Some(s) if s > 0 => {
                let stride = (cfg.horizon / s).max(1);
                (0..s).map(|k| k * stride).filter(|&t| t < cfg.horizon).collect()
            }
            _ => Vec::new(),
        };
        let ledger = cfg.windows.map(|sched| {
            RegretLedger::new(spec.n(), spec.m(), 0, sched.len_of(0))
        });
        TraceBuilder {
            cfg,
            lambda: spec.lambda().to_vec(),
            checkpoints: Vec::new(),
            potentials: Vec::new(),
            window_regrets: Vec::new(),
            window_index: 0,
            window_start: 0,
            prev_window_start: 0,
            ledger,
            audit_times,
            audit: NashAuditSummary::default(),
            pending_checkpoint: None,
        }
    }

    fn window_len(&self) -> u64 {
        self.cfg.windows.map(|s| s.len_of(self.window_index)).unwrap_or(0)
    }

    /// Called before stepping at time `t` with pre-arrival queue sizes and
    /// decision ages.
    fn before_step(&mut self, t: u64, q: &[u64], ages: &[u64]) {
        if self.cfg.windows.is_some() && t == self.window_start {
            self.push_potential(t, ages);
        }
        if self.cfg.checkpoints.binary_search(&t).is_ok() {
            self.pending_checkpoint = Some((t, q.to_vec(), ages.to_vec()));
        }
    }

    /// Potential snapshot at a window boundary; tau measures each age against
    /// the start of the window that just ended.
    fn push_potential(&mut self, t: u64, ages: &[u64]) {
        let ended_len = t - self.prev_window_start;
        let phi = potential(&self.lambda, ages);
        self.potentials.push(PotentialPoint {
            ell: self.window_index,
            t,
            phi,
            z: phi.sqrt(),
            tau: ages.iter().map(|&a| a.saturating_sub(ended_len)).collect(),
        });
    }

    fn audit_due(&self, t: u64) -> bool {
        self.audit_times.binary_search(&t).is_ok()
    }

    fn record_audit(&mut self, ok: bool) {
        self.audit.audited += 1;
        if !ok {
            self.audit.violations += 1;
        }
    }

    /// Called after the outcome of step `t` is known.
    fn after_step(&mut self, outcome: &StepOutcome) {
        if let Some((t, q, age)) = self.pending_checkpoint.take() {
            debug_assert_eq!(t, outcome.t);
            self.checkpoints.push(Checkpoint {
                t,
                q,
                age,
                chosen: outcome.chosen.clone(),
                cleared: outcome.cleared.clone(),
            });
        }
        if let Some(mut ledger) = self.ledger.take() {
            ledger.record_step(&outcome.counterfactual, &outcome.chosen);
            if ledger.is_complete() {
                let n = self.lambda.len();
                let mut regret = Vec::with_capacity(n);
                let mut realized = Vec::with_capacity(n);
                let mut best_fixed = Vec::with_capacity(n);
                for i in 0..n {
                    regret.push(ledger.regret(i).expect("complete window"));
                    realized.push(ledger.realized(i));
                    best_fixed.push(ledger.best_fixed(i).0);
                }
                self.window_regrets.push(WindowRegret {
                    index: self.window_index,
                    start: self.window_start,
                    len: self.window_len(),
                    regret,
                    realized,
                    best_fixed,
                });
                self.prev_window_start = self.window_start;
                self.window_start += self.window_len();
                self.window_index += 1;
                ledger = RegretLedger::new(
                    ledger.n(),
                    ledger.m(),
                    self.window_start,
                    self.cfg.windows.unwrap().len_of(self.window_index),
                );
            }
            self.ledger = Some(ledger);
        }
    }

    /// Final snapshot at t = horizon (no step taken there).
    fn finish(mut self, q: &[u64], ages: &[u64], model: EngineModel, seed: u64, n: usize, m: usize)
        -> RunTrace {
        let t = self.cfg.horizon;
        if self.cfg.checkpoints.binary_search(&t).is_ok() {
            self.checkpoints.push(Checkpoint {
                t,
                q: q.to_vec(),
                age: ages.to_vec(),
                chosen: vec![None; n],
                cleared: vec![false; n],
            });
        }
        if self.cfg.windows.is_some() && t == self.window_start {
            self.push_potential(t, ages);
        }
        RunTrace {
            model,
            seed,
            n,
            m,
            horizon: self.cfg.horizon,
            checkpoints: self.checkpoints,
            potentials: self.potentials,
            window_regrets: self.window_regrets,
            nash_audit: if self.audit.audited > 0 { Some(self.audit) } else { None },
            coupling_max_age_diff: None,
        }
    }
}

/// Runs one engine for the configured horizon.
pub fn run_single(
    spec: &SystemSpec,
    mut policy: Policy,
    cfg: &RunConfig,
    seed: u64,
) -> Result<RunTrace, SimError> {
    let n = spec.n();
    let m = spec.m();
    let mut streams = SimStreams::new(spec, seed);
    let mut state = match cfg.model {
        EngineModel::Dual => EngineState::Dual(DualState::new(n)),
        _ => EngineState::Standard(StandardState::new(n)),
    };
    let mut builder = TraceBuilder::new(cfg.clone(), spec);
    let mu = spec.mu().to_vec();
    for t in 0..cfg.horizon {
        let ages_opt = state.decision_ages(&mut streams);
        let ages: Vec<u64> = ages_opt.iter().map(|a| a.unwrap_or(0)).collect();
        let q = state.q_sizes(&mut streams);
        builder.before_step(t, &q, &ages);
        let choices = policy.choices(t, &ages_opt, m);
        if builder.audit_due(t) {
            builder.record_audit(nash_audit_step(&mu, &choices));
        }
        let outcome = state.step(&mut streams, &choices, cfg.model)?;
        policy.feedback(&outcome);
        builder.after_step(&outcome);
    }
    let ages_opt = state.decision_ages(&mut streams);
    let ages: Vec<u64> = ages_opt.iter().map(|a| a.unwrap_or(0)).collect();
    let q = state.q_sizes(&mut streams);
    Ok(builder.finish(&q, &ages, cfg.model, seed, n, m))
}

/// Drives the standard and dual engines in lockstep from one shared random
/// source and one strategy set, recording the worst age discrepancy (exactly
/// zero by construction).
pub fn run_coupled(
    spec: &SystemSpec,
    strategies: Vec<Box<dyn Strategy>>,
    horizon: u64,
    seed: u64,
) -> Result<(RunTrace, RunTrace), SimError> {
    let cfg = RunConfig::new(EngineModel::Standard, horizon);
    run_coupled_with(spec, Policy::PerQueue(strategies), &cfg, seed)
}

/// Coupled run with explicit configuration. `cfg.model` is ignored; the pair
/// is always (standard, dual).
pub fn run_coupled_with(
    spec: &SystemSpec,
    mut policy: Policy,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(RunTrace, RunTrace), SimError> {
    let n = spec.n();
    let m = spec.m();
    let mut streams = SimStreams::new(spec, seed);
    let mut standard = StandardState::new(n);
    let mut dual = DualState::new(n);
    let std_cfg = RunConfig { model: EngineModel::Standard, ..cfg.clone() };
    let dual_cfg = RunConfig { model: EngineModel::Dual, ..cfg.clone() };
    let mut std_builder = TraceBuilder::new(std_cfg, spec);
    let mut dual_builder = TraceBuilder::new(dual_cfg, spec);
    let mut max_diff: u64 = 0;
    for t in 0..cfg.horizon {
        let ages_s = standard.decision_ages(&mut streams);
        let ages_d = dual.decision_ages(&mut streams);
        let flat_s: Vec<u64> = ages_s.iter().map(|a| a.unwrap_or(0)).collect();
        let flat_d: Vec<u64> = ages_d.iter().map(|a| a.unwrap_or(0)).collect();
        for i in 0..n {
            max_diff = max_diff.max(flat_s[i].abs_diff(flat_d[i]));
            // the dual "no packet yet" state must match the standard empty queue
            debug_assert_eq!(ages_s[i].is_some(), ages_d[i].is_some(), "queue {i} at t={t}");
        }
        let q_s = standard.q_sizes().to_vec();
        let q_d = dual.implied_q(&mut streams);
        debug_assert_eq!(q_s, q_d, "implied dual queue sizes match at t={t}");
        std_builder.before_step(t, &q_s, &flat_s);
        dual_builder.before_step(t, &q_d, &flat_d);
        let choices = policy.choices(t, &ages_s, m);
        let out_s = step_standard(&mut standard, &mut streams, &choices)?;
        let out_d = step_dual(&mut dual, &mut streams, &choices)?;
        debug_assert_eq!(out_s.cleared, out_d.cleared, "coupled clears at t={t}");
        policy.feedback(&out_s);
        std_builder.after_step(&out_s);
        dual_builder.after_step(&out_d);
    }
    let ages_s: Vec<u64> =
        standard.decision_ages(&mut streams).iter().map(|a| a.unwrap_or(0)).collect();
    let ages_d: Vec<u64> =
        dual.decision_ages(&mut streams).iter().map(|a| a.unwrap_or(0)).collect();
    for i in 0..n {
        max_diff = max_diff.max(ages_s[i].abs_diff(ages_d[i]));
    }
    let q_s = standard.q_sizes().to_vec();
    let q_d = dual.implied_q(&mut streams);
    let mut trace_s = std_builder.finish(&q_s, &ages_s, EngineModel::Standard, seed, n, m);
    let mut trace_d = dual_builder.finish(&q_d, &ages_d, EngineModel::Dual, seed, n, m);
    trace_s.coupling_max_age_diff = Some(max_diff);
    trace_d.coupling_max_age_diff = Some(max_diff);
    Ok((trace_s, trace_d))
}
