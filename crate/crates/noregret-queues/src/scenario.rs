//! Scenario configuration, multi-seed orchestration, and result emission.
//! Scenarios are declarative TOML files with a versioned schema; runs are
//! deterministic per seed and reproduce byte-identical CSV artifacts whether
//! seeds execute serially or in parallel.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::central::build_central_scheduler;
use crate::csvio;
use crate::metrics::{
    self, classify_stability, Classification, SeriesKind, StabilityReport,
};
use crate::model::{check_feasibility, max_slack, preprocess, SystemSpec};
use crate::params::compute_window;
use crate::rng::{sub_rng, Role};
use crate::sim::{
    log8_checkpoints, run_coupled_with, run_single, EngineModel, Policy, RunConfig, RunTrace,
    WindowSchedule,
};
use crate::strategies::{
    impossibility_spec, tightness_spec, Exp3p, Exp3pConfig, FixedServer, NashCoordinator,
    Strategy,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config invalid at `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },
    #[error("io failure on {path}: {source}")]
    IoFailure { path: PathBuf, source: std::io::Error },
    #[error("toml parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

fn invalid(field: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::ConfigInvalid { field: field.into(), reason: reason.into() }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::IoFailure { path: path.to_path_buf(), source }
}

// ---------------------------------------------------------------------------
// file schema

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema_version: u32,
    name: String,
    model: ModelKind,
    horizon: u64,
    seeds: u32,
    base_seed: u64,
    #[serde(default)]
    window: Option<WindowField>,
    system: SystemSection,
    strategy: StrategySection,
    #[serde(default)]
    out_dir: Option<String>,
    #[serde(default)]
    nash_audit: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Standard,
    Dual,
    Coupled,
    NoPriority,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Standard => "standard",
            ModelKind::Dual => "dual",
            ModelKind::Coupled => "coupled",
            ModelKind::NoPriority => "no_priority",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum WindowField {
    Fixed(u64),
    Named(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    #[serde(default)]
    lambda: Option<Vec<f64>>,
    #[serde(default)]
    mu: Option<Vec<f64>>,
    #[serde(default)]
    family: Option<FamilySection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilySection {
    kind: String,
    #[serde(default)]
    n_root: Option<u32>,
    #[serde(default)]
    n: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategySection {
    kind: StrategyKind,
    /// 1-based server for `fixed`.
    #[serde(default)]
    server: Option<usize>,
    /// 1-based per-queue servers for `fixed`.
    #[serde(default)]
    servers: Option<Vec<usize>>,
    #[serde(default)]
    delta: Option<f64>,
    #[serde(default)]
    freezing: Option<bool>,
    #[serde(default)]
    gamma: Option<f64>,
    #[serde(default)]
    learning_rate: Option<f64>,
    #[serde(default)]
    bonus: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Fixed,
    TopServer,
    Exp3p,
    Central,
    NashCoordinator,
}

// ---------------------------------------------------------------------------
// resolved configuration

/// Window request as written in the scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSpec {
    None,
    Auto,
    Fixed(u64),
    Squares,
}

#[derive(Debug, Clone)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// 0-based per-queue fixed assignment.
    pub fixed_servers: Option<Vec<usize>>,
    pub delta: f64,
    pub freezing: bool,
    pub gamma: Option<f64>,
    pub learning_rate: Option<f64>,
    pub bonus: Option<f64>,
}

/// A validated scenario: the preprocessed system, model/strategy pairing, and
/// run shape.
#[derive(Debug)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelKind,
    pub spec: SystemSpec,
    pub strategy: StrategyConfig,
    pub horizon: u64,
    pub seeds: u32,
    pub base_seed: u64,
    pub window: WindowSpec,
    pub out_dir: PathBuf,
    pub nash_audit: Option<u64>,
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        ScenarioConfig::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<ScenarioConfig, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text)?;
        ScenarioConfig::resolve(file)
    }

    fn resolve(file: ScenarioFile) -> Result<ScenarioConfig, ScenarioError> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", file.schema_version),
            ));
        }
        if file.horizon == 0 {
            return Err(invalid("horizon", "must be positive"));
        }
        if file.seeds == 0 {
            return Err(invalid("seeds", "must be positive"));
        }

        let raw_spec = match (&file.system.lambda, &file.system.mu, &file.system.family) {
            (Some(lam), Some(mu), None) => SystemSpec::new(lam.clone(), mu.clone())
                .map_err(|e| invalid("system", e.to_string()))?,
            (None, None, Some(family)) => match family.kind.as_str() {
                "impossibility" => {
                    let n_root = family
                        .n_root
                        .ok_or_else(|| invalid("system.family.n_root", "required"))?;
                    if n_root < 3 {
                        return Err(invalid("system.family.n_root", "must be >= 3"));
                    }
                    impossibility_spec(n_root)
                }
                "tightness" => {
                    let n =
                        family.n.ok_or_else(|| invalid("system.family.n", "required"))?;
                    if n < 2 {
                        return Err(invalid("system.family.n", "must be >= 2"));
                    }
                    tightness_spec(n)
                }
                other => {
                    return Err(invalid("system.family.kind", format!("unknown family `{other}`")))
                }
            },
            _ => {
                return Err(invalid(
                    "system",
                    "give either lambda+mu or a family, not both",
                ))
            }
        };
        let spec = preprocess(&raw_spec).map_err(|e| invalid("system", e.to_string()))?;

        let window = match &file.window {
            None => WindowSpec::None,
            Some(WindowField::Fixed(w)) => {
                if *w == 0 {
                    return Err(invalid("window", "must be positive"));
                }
                WindowSpec::Fixed(*w)
            }
            Some(WindowField::Named(s)) => match s.as_str() {
                "auto" => WindowSpec::Auto,
                "squares" => WindowSpec::Squares,
                other => return Err(invalid("window", format!("unknown window `{other}`"))),
            },
        };

        let s = &file.strategy;
        let fixed_servers = match s.kind {
            StrategyKind::Fixed => {
                let assignment: Vec<usize> = match (&s.server, &s.servers) {
                    (Some(j), None) => vec![*j; spec.n()],
                    (None, Some(v)) => {
                        if v.len() != spec.n() {
                            return Err(invalid(
                                "strategy.servers",
                                format!("need {} entries, got {}", spec.n(), v.len()),
                            ));
                        }
                        v.clone()
                    }
                    _ => {
                        return Err(invalid(
                            "strategy",
                            "fixed strategy needs `server` or `servers`",
                        ))
                    }
                };
                for &j in &assignment {
                    if j == 0 || j > spec.m() {
                        return Err(invalid(
                            "strategy.server",
                            format!("server {j} outside 1..={}", spec.m()),
                        ));
                    }
                }
                Some(assignment.iter().map(|j| j - 1).collect())
            }
            StrategyKind::TopServer => Some(vec![0; spec.n()]),
            _ => None,
        };

        let strategy = StrategyConfig {
            kind: s.kind,
            fixed_servers,
            delta: s.delta.unwrap_or(0.05),
            freezing: s.freezing.unwrap_or(true),
            gamma: s.gamma,
            learning_rate: s.learning_rate,
            bonus: s.bonus,
        };

        // model/strategy compatibility
        match strategy.kind {
            StrategyKind::NashCoordinator => {
                if file.model != ModelKind::NoPriority {
                    return Err(invalid(
                        "strategy.kind",
                        "nash_coordinator requires model = \"no_priority\"",
                    ));
                }
                NashCoordinator::for_spec(&spec)
                    .map_err(|e| invalid("strategy.kind", e.to_string()))?;
            }
            StrategyKind::Central => {
                if !check_feasibility(&spec) {
                    return Err(invalid(
                        "strategy.kind",
                        "central scheduler needs a feasible system",
                    ));
                }
            }
            StrategyKind::Exp3p => {
                if matches!(window, WindowSpec::None | WindowSpec::Squares) {
                    return Err(invalid(
                        "window",
                        "exp3p needs a fixed or auto window length",
                    ));
                }
                if !(strategy.delta > 0.0 && strategy.delta < 1.0) {
                    return Err(invalid("strategy.delta", "must be in (0, 1)"));
                }
            }
            _ => {}
        }

        let out_dir = file
            .out_dir
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out").join(&file.name));

        Ok(ScenarioConfig {
            name: file.name,
            model: file.model,
            spec,
            strategy,
            horizon: file.horizon,
            seeds: file.seeds,
            base_seed: file.base_seed,
            window,
            out_dir,
            nash_audit: file.nash_audit,
        })
    }

    /// Resolved window length: auto sizes through the slack-based calculator.
    pub fn resolved_window(&self) -> Result<Option<WindowSchedule>, ScenarioError> {
        match self.window {
            WindowSpec::None => Ok(None),
            WindowSpec::Fixed(w) => Ok(Some(WindowSchedule::Fixed(w))),
            WindowSpec::Squares => Ok(Some(WindowSchedule::Squares)),
            WindowSpec::Auto => {
                let slack = max_slack(&self.spec);
                let eta = slack.eta.filter(|&e| e > 0.0).ok_or_else(|| {
                    invalid("window", "auto sizing needs positive slack eta")
                })?;
                let params = compute_window(&self.spec, eta)
                    .map_err(|e| invalid("window", e.to_string()))?;
                Ok(Some(WindowSchedule::Fixed(params.w)))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// execution

#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seeds: Option<u32>,
    pub horizon: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

/// Aggregated outcome of a scenario execution.
pub struct ScenarioOutcome {
    pub name: String,
    pub out_dir: PathBuf,
    pub traces: Vec<RunTrace>,
    /// Dual-side traces for coupled runs.
    pub dual_traces: Vec<RunTrace>,
    /// Full classification when enough seeds ran.
    pub stability: Option<StabilityReport>,
    pub exponent: f64,
    pub linear_slope: f64,
    pub coupling_max_age_diff: Option<u64>,
    pub nash_audit: Option<(u64, u64)>,
    /// Fraction of complete windows with non-positive regret for every queue.
    pub zero_regret_fraction: Option<f64>,
    /// Half-rate slack margin of the system; `None` when no positive slack
    /// exists (the learning guarantee then makes no promise).
    pub slack_eta: Option<f64>,
}

impl ScenarioOutcome {
    pub fn summary_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        writeln!(out, "scenario: {}", self.name).unwrap();
        writeln!(out, "runs:     {}", self.traces.len()).unwrap();
        writeln!(out, "exponent: {:.4}", self.exponent).unwrap();
        writeln!(out, "slope:    {:.6}", self.linear_slope).unwrap();
        match &self.stability {
            Some(r) => {
                writeln!(out, "classification: {}", r.classification.as_str()).unwrap()
            }
            None => writeln!(out, "classification: (needs >= 30 seeds)").unwrap(),
        }
        if let Some(d) = self.coupling_max_age_diff {
            writeln!(out, "coupling max |age diff|: {d}").unwrap();
        }
        if let Some((audited, violations)) = self.nash_audit {
            writeln!(out, "nash audit: {violations} violations / {audited} steps").unwrap();
        }
        if let Some(f) = self.zero_regret_fraction {
            writeln!(out, "zero-regret windows: {f:.4}").unwrap();
        }
        match self.slack_eta {
            Some(eta) => writeln!(out, "slack eta: {eta:.4}").unwrap(),
            None => {
                writeln!(out, "slack eta: none (half-rate feasibility fails)").unwrap()
            }
        }
        out
    }

    pub fn classification(&self) -> Option<Classification> {
        self.stability.as_ref().map(|r| r.classification)
    }
}

fn build_policy(cfg: &ScenarioConfig, window: Option<WindowSchedule>, seed: u64) -> Policy {
    match cfg.strategy.kind {
        StrategyKind::Fixed | StrategyKind::TopServer => {
            let servers = cfg.strategy.fixed_servers.as_ref().expect("validated");
            let strategies: Vec<Box<dyn Strategy>> =
                servers.iter().map(|&j| Box::new(FixedServer::new(j)) as Box<dyn Strategy>).collect();
            Policy::PerQueue(strategies)
        }
        StrategyKind::Exp3p => {
            let w = match window {
                Some(WindowSchedule::Fixed(w)) => w,
                _ => cfg.horizon,
            };
            let strategies: Vec<Box<dyn Strategy>> = (0..cfg.spec.n())
                .map(|i| {
                    let mut c = Exp3pConfig::new(cfg.spec.m(), w, cfg.strategy.delta);
                    c.freezing = cfg.strategy.freezing;
                    c.gamma = cfg.strategy.gamma;
                    c.learning_rate = cfg.strategy.learning_rate;
                    c.bonus = cfg.strategy.bonus;
                    Box::new(Exp3p::new(c, crate::rng::sub_seed(seed, Role::Strategy, i as u64)))
                        as Box<dyn Strategy>
                })
                .collect();
            Policy::PerQueue(strategies)
        }
        StrategyKind::Central => {
            let dist = build_central_scheduler(&cfg.spec).expect("validated feasible");
            Policy::central(dist, seed)
        }
        StrategyKind::NashCoordinator => {
            Policy::Nash(NashCoordinator::for_spec(&cfg.spec).expect("validated"))
        }
    }
}

fn engine_model(model: ModelKind) -> EngineModel {
    match model {
        ModelKind::Standard | ModelKind::Coupled => EngineModel::Standard,
        ModelKind::Dual => EngineModel::Dual,
        ModelKind::NoPriority => EngineModel::NoPriority,
    }
}

/// Executes every seed of a scenario, writes the per-run CSV artifacts and a
/// summary report, and returns the aggregated outcome.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    overrides: &RunOverrides,
) -> Result<ScenarioOutcome, ScenarioError> {
    let seeds = overrides.seeds.unwrap_or(cfg.seeds);
    let horizon = overrides.horizon.unwrap_or(cfg.horizon);
    if seeds == 0 {
        return Err(invalid("seeds", "must be positive"));
    }
    if horizon == 0 {
        return Err(invalid("horizon", "must be positive"));
    }
    let out_dir = overrides.out_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let jobs = overrides.jobs.unwrap_or(1).max(1);
    let window = cfg.resolved_window()?;

    let run_cfg = RunConfig {
        model: engine_model(cfg.model),
        horizon,
        checkpoints: log8_checkpoints(horizon),
        windows: window,
        nash_audit_samples: cfg.nash_audit,
    };

    let seed_list: Vec<u64> = (0..seeds as u64).map(|k| cfg.base_seed + k).collect();
    let coupled = cfg.model == ModelKind::Coupled;

    let execute = |seed: u64| -> (RunTrace, Option<RunTrace>) {
        let policy = build_policy(cfg, window, seed);
        if coupled {
            let (s, d) = run_coupled_with(&cfg.spec, policy, &run_cfg, seed)
                .expect("engine choices are produced by validated policies");
            (s, Some(d))
        } else {
            let t = run_single(&cfg.spec, policy, &run_cfg, seed)
                .expect("engine choices are produced by validated policies");
            (t, None)
        }
    };

    let results: Vec<(RunTrace, Option<RunTrace>)> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| {
            use rayon::prelude::*;
            seed_list.par_iter().map(|&s| execute(s)).collect()
        })
    } else {
        seed_list.iter().map(|&s| execute(s)).collect()
    };

    let mut traces = Vec::with_capacity(results.len());
    let mut dual_traces = Vec::new();
    for (t, d) in results {
        traces.push(t);
        if let Some(d) = d {
            dual_traces.push(d);
        }
    }

    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    for trace in &traces {
        let stem = if coupled { "trace_standard" } else { "trace" };
        write_artifacts(&out_dir, stem, trace)?;
    }
    for trace in &dual_traces {
        write_artifacts(&out_dir, "trace_dual", trace)?;
    }

    // aggregation (sorted by seed for order-independent folds)
    let series = SeriesKind::TotalQueue;
    let (times, values) = metrics::series_by_checkpoint(&traces, series)
        .map_err(|e| invalid("runs", e.to_string()))?;
    let means: Vec<f64> = values.iter().map(|v| metrics::mean(v)).collect();
    let exponent = metrics::fit_exponent(&times, &means);
    let linear_slope = metrics::fit_linear_slope(&times, &means);
    let stability = classify_stability(&traces, series).ok();

    let coupling_max_age_diff = if coupled {
        traces.iter().filter_map(|t| t.coupling_max_age_diff).max()
    } else {
        None
    };
    let nash_audit = traces
        .iter()
        .filter_map(|t| t.nash_audit)
        .fold(None, |acc: Option<(u64, u64)>, a| {
            let (x, y) = acc.unwrap_or((0, 0));
            Some((x + a.audited, y + a.violations))
        });
    let zero_regret_fraction = if traces.iter().any(|t| !t.window_regrets.is_empty()) {
        let mut zero = 0u64;
        let mut total = 0u64;
        for t in &traces {
            for w in &t.window_regrets {
                total += 1;
                if w.regret.iter().all(|&r| r <= 0) {
                    zero += 1;
                }
            }
        }
        Some(zero as f64 / total as f64)
    } else {
        None
    };

    let outcome = ScenarioOutcome {
        name: cfg.name.clone(),
        out_dir: out_dir.clone(),
        traces,
        dual_traces,
        stability,
        exponent,
        linear_slope,
        coupling_max_age_diff,
        nash_audit,
        zero_regret_fraction,
        slack_eta: max_slack(&cfg.spec).eta.filter(|&e| e > 0.0),
    };

    let summary_path = out_dir.join("summary.txt");
    let mut summary = outcome.summary_text();
    if let Some(report) = &outcome.stability {
        summary.push('\n');
        summary.push_str(&report.to_string());
        fs::write(out_dir.join("stability.csv"), csvio::stability_csv(report))
            .map_err(io_err(&out_dir))?;
        fs::write(out_dir.join("report.csv"), csvio::report_csv(report))
            .map_err(io_err(&out_dir))?;
    }
    fs::write(&summary_path, summary).map_err(io_err(&summary_path))?;
    Ok(outcome)
}

fn write_artifacts(dir: &Path, stem: &str, trace: &RunTrace) -> Result<(), ScenarioError> {
    let seed = trace.seed;
    let path = dir.join(format!("{stem}_s{seed:05}.csv"));
    fs::write(&path, csvio::trace_csv(trace)).map_err(io_err(&path))?;
    if !trace.window_regrets.is_empty() {
        let path = dir.join(format!("regret_s{seed:05}_{}.csv", trace.model.as_str()));
        fs::write(&path, csvio::regret_csv(trace)).map_err(io_err(&path))?;
    }
    if !trace.potentials.is_empty() {
        let path = dir.join(format!("potential_s{seed:05}_{}.csv", trace.model.as_str()));
        fs::write(&path, csvio::potential_csv(trace)).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Learning-scenario entry point. The stability guarantee only applies when
/// the half-rate slack eta is positive; the slack is computed and reported in
/// the summary either way, so overloaded systems run and classify as linear.
pub fn run_learning_scenario(
    cfg: &ScenarioConfig,
    overrides: &RunOverrides,
) -> Result<ScenarioOutcome, ScenarioError> {
    if cfg.strategy.kind != StrategyKind::Exp3p {
        return Err(invalid("strategy.kind", "learning scenario needs exp3p"));
    }
    run_scenario(cfg, overrides)
}

// ---------------------------------------------------------------------------
// quick self-checks (the `verify` CLI verb)

pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Runs the property suite on tiny instances: coupling, potential identity,
/// norm sandwich, regret arithmetic, and decomposition round trips.
pub fn verify_quick() -> Vec<CheckResult> {
    use rand::Rng;

    let mut results = Vec::new();

    // exact coupling on a few random specs
    {
        let mut rng = sub_rng(1, Role::Central, 1);
        let mut worst = 0u64;
        for trial in 0..3u64 {
            let n = rng.random_range(1..=3);
            let m = rng.random_range(1..=3);
            let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.9)).collect();
            let mu: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
            let spec = SystemSpec::new(lambda, mu).unwrap();
            let strategies: Vec<Box<dyn Strategy>> = (0..n)
                .map(|i| {
                    Box::new(Exp3p::new(Exp3pConfig::new(m, 128, 0.1), trial * 31 + i as u64))
                        as Box<dyn Strategy>
                })
                .collect();
            let (s, _d) = crate::sim::run_coupled(&spec, strategies, 2_000, trial).unwrap();
            worst = worst.max(s.coupling_max_age_diff.unwrap_or(u64::MAX));
        }
        results.push(CheckResult {
            name: "coupling-age-identity",
            pass: worst == 0,
            detail: format!("max |age diff| = {worst}"),
        });
    }

    // potential closed form vs layered sum
    {
        let mut rng = sub_rng(2, Role::Central, 2);
        let mut pass = true;
        for _ in 0..200 {
            let n = rng.random_range(1..=6);
            let lambda: Vec<f64> =
                (0..n).map(|_| rng.random_range(1u32..=1 << 20) as f64 / (1u64 << 20) as f64).collect();
            let ages: Vec<u64> = (0..n).map(|_| rng.random_range(0..=40u64)).collect();
            let closed = metrics::potential(&lambda, &ages);
            let mut layered = 0.0;
            for tau in 1..=ages.iter().copied().max().unwrap_or(0) {
                for (l, &t) in lambda.iter().zip(&ages) {
                    if t >= tau {
                        layered += l * (t - tau) as f64;
                    }
                }
            }
            pass &= closed == layered;
        }
        results.push(CheckResult {
            name: "potential-identity",
            pass,
            detail: "closed form vs layered sum, 200 draws".into(),
        });
    }

    // norm sandwich
    {
        let mut rng = sub_rng(3, Role::Central, 3);
        let mut pass = true;
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
            let (l1, l2) = metrics::weighted_norms(&lambda, &x);
            let lam_min = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
            let lam_sum: f64 = lambda.iter().sum();
            pass &= lam_min.sqrt() * l2 <= l1 * (1.0 + 1e-12);
            pass &= l1 <= lam_sum.sqrt() * l2 * (1.0 + 1e-12);
        }
        results.push(CheckResult {
            name: "norm-sandwich",
            pass,
            detail: "200 random vectors".into(),
        });
    }

    // regret ledger vs direct recount
    {
        let mut rng = sub_rng(4, Role::Central, 4);
        let mut pass = true;
        for _ in 0..20 {
            let n = 2;
            let m = 3;
            let w = 16u64;
            let mut ledger = metrics::RegretLedger::new(n, m, 0, w);
            let mut rows = Vec::new();
            let mut chosen = Vec::new();
            for _ in 0..w {
                let row: Vec<u8> = (0..n * m).map(|_| rng.random_range(0..=1u8)).collect();
                let cs: Vec<Option<usize>> =
                    (0..n).map(|_| Some(rng.random_range(0..m))).collect();
                ledger.record_step(&row, &cs);
                rows.push(row);
                chosen.push(cs);
            }
            for i in 0..n {
                let mut best = 0i64;
                for j in 0..m {
                    let total: i64 =
                        rows.iter().map(|r| r[i * m + j] as i64).sum();
                    best = best.max(total);
                }
                let realized: i64 = rows
                    .iter()
                    .zip(&chosen)
                    .map(|(r, c)| c[i].map_or(0, |j| r[i * m + j] as i64))
                    .sum();
                pass &= ledger.regret(i).unwrap() == best - realized;
            }
        }
        results.push(CheckResult {
            name: "regret-ledger",
            pass,
            detail: "ledger vs direct recount, 20 windows".into(),
        });
    }

    // decomposition round trip
    {
        use rand::seq::SliceRandom;
        let mut rng = sub_rng(5, Role::Central, 5);
        let mut pass = true;
        for _ in 0..20 {
            let l = rng.random_range(2..=8usize);
            let perms = rng.random_range(1..l.max(2));
            let mut entries = vec![0.0; l * l];
            let mut weights: Vec<f64> = (0..perms).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            for &w in &weights {
                let mut cols: Vec<usize> = (0..l).collect();
                cols.shuffle(&mut rng);
                for (row, &col) in cols.iter().enumerate() {
                    entries[row * l + col] += w;
                }
            }
            let p = crate::central::DoublyStochastic::new(entries, l).unwrap();
            match crate::central::birkhoff_decompose(&p) {
                Ok(d) => pass &= d.validate_against(&p).is_ok(),
                Err(_) => pass = false,
            }
        }
        results.push(CheckResult {
            name: "birkhoff-roundtrip",
            pass,
            detail: "20 random matrices up to 8x8".into(),
        });
    }

    results
}

/// Lists scenario files (name, path) under a directory, sorted by name.
pub fn list_scenarios(dir: &Path) -> Result<Vec<(String, PathBuf)>, ScenarioError> {
    let mut out = Vec::new();
    let entries = fs::read_dir(dir).map_err(io_err(dir))?;
    for entry in entries {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "toml") {
            let name = path.file_stem().unwrap().to_string_lossy().into_owned();
            out.push((name, path));
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = r#"
schema_version = 1
name = "mini"
model = "standard"
horizon = 512
seeds = 2
base_seed = 9

[system]
lambda = [0.3]
mu = [0.8]

[strategy]
kind = "fixed"
server = 1
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ScenarioConfig::from_toml(MINI).unwrap();
        assert_eq!(cfg.name, "mini");
        assert_eq!(cfg.model, ModelKind::Standard);
        assert_eq!(cfg.spec.n(), 1);
        assert_eq!(cfg.strategy.fixed_servers, Some(vec![0]));
        assert_eq!(cfg.window, WindowSpec::None);
    }

    #[test]
    fn rejects_wrong_schema_version() {
        let text = MINI.replace("schema_version = 1", "schema_version = 2");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("schema_version"), "{err}");
    }

    #[test]
    fn rejects_unknown_field_with_path() {
        let text = MINI.replace("base_seed = 9", "base_seed = 9\nbogus = 1");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn rejects_nash_coordinator_outside_no_priority() {
        let text = r#"
schema_version = 1
name = "bad"
model = "standard"
horizon = 100
seeds = 1
base_seed = 0

[system]
family = { kind = "impossibility", n_root = 3 }

[strategy]
kind = "nash_coordinator"
"#;
        let err = ScenarioConfig::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("no_priority"), "{err}");
    }

    #[test]
    fn rejects_exp3p_without_window() {
        let text = MINI.replace("kind = \"fixed\"\nserver = 1", "kind = \"exp3p\"");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("window"), "{err}");
    }

    #[test]
    fn rejects_out_of_range_fixed_server() {
        let text = MINI.replace("server = 1", "server = 2");
        assert!(ScenarioConfig::from_toml(&text).is_err());
        let text = MINI.replace("server = 1", "server = 0");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn family_shorthand_expands() {
        let text = r#"
schema_version = 1
name = "fam"
model = "no_priority"
horizon = 100
seeds = 1
base_seed = 0
nash_audit = 10

[system]
family = { kind = "impossibility", n_root = 3 }

[strategy]
kind = "nash_coordinator"
"#;
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        assert_eq!(cfg.spec.n(), 27);
        assert_eq!(cfg.nash_audit, Some(10));
    }

    #[test]
    fn auto_window_resolves_through_slack() {
        let text = r#"
schema_version = 1
name = "auto"
model = "standard"
horizon = 1000
seeds = 1
base_seed = 0
window = "auto"

[system]
lambda = [0.2, 0.1]
mu = [1.0, 0.8]

[strategy]
kind = "exp3p"
"#;
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        assert_eq!(cfg.window, WindowSpec::Auto);
        assert_eq!(cfg.resolved_window().unwrap(), Some(WindowSchedule::Fixed(1 << 22)));

        // no positive slack: auto sizing has nothing to work from
        let text = text.replace("lambda = [0.2, 0.1]", "lambda = [0.6, 0.1]");
        let cfg = ScenarioConfig::from_toml(&text).unwrap();
        assert!(cfg.resolved_window().is_err());
    }

    #[test]
    fn dual_model_scenario_runs() {
        let text = MINI.replace("model = \"standard\"", "model = \"dual\"");
        let cfg = ScenarioConfig::from_toml(&text).unwrap();
        let dir = std::env::temp_dir().join("nrq_test_dual");
        let _ = fs::remove_dir_all(&dir);
        let outcome = run_scenario(
            &cfg,
            &RunOverrides { out_dir: Some(dir.clone()), ..Default::default() },
        )
        .unwrap();
        assert_eq!(outcome.traces.len(), 2);
        assert!(dir.join("trace_s00009.csv").exists());
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn tiny_run_writes_artifacts_and_is_reproducible() {
        let cfg = ScenarioConfig::from_toml(MINI).unwrap();
        let dir1 = std::env::temp_dir().join("nrq_test_mini_a");
        let dir2 = std::env::temp_dir().join("nrq_test_mini_b");
        let _ = fs::remove_dir_all(&dir1);
        let _ = fs::remove_dir_all(&dir2);
        let o1 = run_scenario(
            &cfg,
            &RunOverrides { out_dir: Some(dir1.clone()), ..Default::default() },
        )
        .unwrap();
        let o2 = run_scenario(
            &cfg,
            &RunOverrides { out_dir: Some(dir2.clone()), jobs: Some(4), ..Default::default() },
        )
        .unwrap();
        assert_eq!(o1.traces.len(), 2);
        for seed in 9..=10u64 {
            let a = fs::read(dir1.join(format!("trace_s{seed:05}.csv"))).unwrap();
            let b = fs::read(dir2.join(format!("trace_s{seed:05}.csv"))).unwrap();
            assert_eq!(a, b, "serial and parallel runs agree byte for byte");
        }
        assert_eq!(o1.summary_text(), o2.summary_text());
        let _ = fs::remove_dir_all(&dir1);
        let _ = fs::remove_dir_all(&dir2);
    }

    #[test]
    fn verify_quick_passes() {
        for check in verify_quick() {
            assert!(check.pass, "{}: {}", check.name, check.detail);
        }
    }

    #[test]
    fn overloaded_learning_system_classifies_linear() {
        let text = r#"
schema_version = 1
name = "overload-test"
model = "standard"
horizon = 20000
seeds = 30
base_seed = 500
window = 2048

[system]
lambda = [0.9, 0.7]
mu = [0.8, 0.4]

[strategy]
kind = "exp3p"
delta = 0.05
"#;
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        let dir = std::env::temp_dir().join("nrq_test_overload");
        let _ = fs::remove_dir_all(&dir);
        let outcome = run_learning_scenario(
            &cfg,
            &RunOverrides { out_dir: Some(dir.clone()), jobs: Some(4), ..Default::default() },
        )
        .unwrap();
        assert_eq!(outcome.slack_eta, None, "no half-rate slack in overload");
        let report = outcome.stability.as_ref().unwrap();
        assert_eq!(report.classification, Classification::LinearGrowth);
        // arrivals exceed total service by 0.4 per step once the learners
        // spread across servers
        assert!(report.linear_slope > 0.25, "slope {}", report.linear_slope);
        let _ = fs::remove_dir_all(&dir);
    }
}
