//! Measurement: windowed regret ledgers, the age potential and its square
//! root, weighted norms, moment estimation with bootstrap errors, and the
//! empirical stability classifier.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::sim::RunTrace;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("window has {recorded} of {expected} steps recorded")]
    IncompleteWindow { recorded: u64, expected: u64 },
    #[error("need at least {need} traces with horizon >= {min_horizon}, got {got}")]
    InsufficientData { need: usize, min_horizon: u64, got: usize },
    #[error("traces disagree on checkpoint grid")]
    MismatchedTraces,
}

/// Per-step record of the counterfactual success matrix and realized choices
/// over one window.
pub struct RegretLedger {
    n: usize,
    m: usize,
    start: u64,
    len: u64,
    rows: Vec<u8>,
    choices: Vec<Option<u16>>,
    recorded: u64,
}

impl RegretLedger {
    pub fn new(n: usize, m: usize, start: u64, len: u64) -> Self {
        RegretLedger {
            n,
            m,
            start,
            len,
            rows: Vec::with_capacity((len as usize).saturating_mul(n * m).min(1 << 24)),
            choices: Vec::new(),
            recorded: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.recorded == 0
    }

    pub fn is_complete(&self) -> bool {
        self.recorded == self.len
    }

    /// Appends one step: the n x m would-have-cleared row and each queue's
    /// chosen server.
    pub fn record_step(&mut self, counterfactual: &[u8], chosen: &[Option<usize>]) {
        assert_eq!(counterfactual.len(), self.n * self.m);
        assert_eq!(chosen.len(), self.n);
        assert!(self.recorded < self.len, "window already complete");
        self.rows.extend_from_slice(counterfactual);
        self.choices.extend(chosen.iter().map(|c| c.map(|j| j as u16)));
        self.recorded += 1;
    }

    fn require_complete(&self) -> Result<(), MetricsError> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(MetricsError::IncompleteWindow { recorded: self.recorded, expected: self.len })
        }
    }

    /// Packets the queue actually cleared on the window.
    pub fn realized(&self, queue: usize) -> u64 {
        let mut total = 0u64;
        for step in 0..self.recorded as usize {
            if let Some(j) = self.choices[step * self.n + queue] {
                total += self.rows[step * self.n * self.m + queue * self.m + j as usize] as u64;
            }
        }
        total
    }

    /// Best fixed-server hindsight count and the achieving server.
    pub fn best_fixed(&self, queue: usize) -> (u64, usize) {
        let mut best = (0u64, 0usize);
        for j in 0..self.m {
            let mut total = 0u64;
            for step in 0..self.recorded as usize {
                total += self.rows[step * self.n * self.m + queue * self.m + j] as u64;
            }
            if total > best.0 {
                best = (total, j);
            }
        }
        best
    }

    /// Windowed regret: best fixed server in hindsight minus realized clears,
    /// on the same sample path. Can be negative.
    pub fn regret(&self, queue: usize) -> Result<i64, MetricsError> {
        self.require_complete()?;
        Ok(self.best_fixed(queue).0 as i64 - self.realized(queue) as i64)
    }
}

/// Age potential: sum over queues of lambda_i * T_i * (T_i - 1) / 2. Equals
/// the layered sum over age thresholds, in closed form.
pub fn potential(lambda: &[f64], ages: &[u64]) -> f64 {
    debug_assert_eq!(lambda.len(), ages.len());
    0.5 * lambda
        .iter()
        .zip(ages)
        .map(|(&l, &t)| l * ((t * t.saturating_sub(1)) as f64))
        .sum::<f64>()
}

/// Weighted l1 and l2 norms: sum lambda_i |x_i| and sqrt(sum lambda_i x_i^2).
pub fn weighted_norms(lambda: &[f64], x: &[f64]) -> (f64, f64) {
    debug_assert_eq!(lambda.len(), x.len());
    let l1 = lambda.iter().zip(x).map(|(&l, &v)| l * v.abs()).sum::<f64>();
    let l2 = lambda.iter().zip(x).map(|(&l, &v)| l * v * v).sum::<f64>().sqrt();
    (l1, l2)
}

/// Which per-checkpoint series to analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    TotalQueue,
    TotalAge,
    QueueLen(usize),
    QueueAge(usize),
}

impl SeriesKind {
    pub fn label(&self) -> String {
        match self {
            SeriesKind::TotalQueue => "total_queue".into(),
            SeriesKind::TotalAge => "total_age".into(),
            SeriesKind::QueueLen(i) => format!("queue_len_{i}"),
            SeriesKind::QueueAge(i) => format!("queue_age_{i}"),
        }
    }

    fn eval(&self, q: &[u64], age: &[u64]) -> f64 {
        match self {
            SeriesKind::TotalQueue => q.iter().sum::<u64>() as f64,
            SeriesKind::TotalAge => age.iter().sum::<u64>() as f64,
            SeriesKind::QueueLen(i) => q[*i] as f64,
            SeriesKind::QueueAge(i) => age[*i] as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Bounded,
    SqrtGrowth,
    LinearGrowth,
    Inconclusive,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Bounded => "bounded",
            Classification::SqrtGrowth => "sqrt-growth",
            Classification::LinearGrowth => "linear-growth",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

/// Moment estimates at one checkpoint, with bootstrap standard errors over
/// seeds (200 resamples).
#[derive(Debug, Clone)]
pub struct MomentRow {
    pub t: u64,
    pub mean: f64,
    pub m2: f64,
    pub m4: f64,
    pub se_mean: f64,
    pub se_m2: f64,
    pub se_m4: f64,
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub series: SeriesKind,
    pub seeds: usize,
    pub horizon: u64,
    /// Log-log least-squares exponent over the tail half of the checkpoints.
    pub exponent: f64,
    /// Plain least-squares slope of the mean series over the tail half.
    pub linear_slope: f64,
    pub classification: Classification,
    pub moments: Vec<MomentRow>,
}

impl std::fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "series:          {}", self.series.label())?;
        writeln!(f, "seeds:           {}", self.seeds)?;
        writeln!(f, "horizon:         {}", self.horizon)?;
        writeln!(f, "growth exponent: {:.4}", self.exponent)?;
        writeln!(f, "linear slope:    {:.6}", self.linear_slope)?;
        writeln!(f, "classification:  {}", self.classification.as_str())?;
        if let Some(last) = self.moments.last() {
            writeln!(
                f,
                "final moments:   E[X]={:.4} (se {:.4}), E[X^2]={:.4}, E[X^4]={:.4}",
                last.mean, last.se_mean, last.m2, last.m4
            )?;
        }
        Ok(())
    }
}

/// Classification thresholds: bounded below exponent 0.1, sqrt within
/// 0.5 +/- 0.15, linear within 1.0 +/- 0.15, otherwise inconclusive.
pub fn classify_exponent(exponent: f64) -> Classification {
    if exponent < 0.1 {
        Classification::Bounded
    } else if (exponent - 0.5).abs() <= 0.15 {
        Classification::SqrtGrowth
    } else if (exponent - 1.0).abs() <= 0.15 {
        Classification::LinearGrowth
    } else {
        Classification::Inconclusive
    }
}

/// Pulls the series value per (trace, checkpoint); all traces must share the
/// checkpoint grid. Returns (times, per-checkpoint values per seed).
pub fn series_by_checkpoint(
    traces: &[RunTrace],
    series: SeriesKind,
) -> Result<(Vec<u64>, Vec<Vec<f64>>), MetricsError> {
    let first = traces.first().ok_or(MetricsError::InsufficientData {
        need: 1,
        min_horizon: 0,
        got: 0,
    })?;
    let times: Vec<u64> = first.checkpoints.iter().map(|c| c.t).collect();
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(traces.len()); times.len()];
    let mut ordered: Vec<&RunTrace> = traces.iter().collect();
    ordered.sort_by_key(|t| t.seed);
    for trace in ordered {
        if trace.checkpoints.len() != times.len()
            || trace.checkpoints.iter().zip(&times).any(|(c, &t)| c.t != t)
        {
            return Err(MetricsError::MismatchedTraces);
        }
        for (k, c) in trace.checkpoints.iter().enumerate() {
            values[k].push(series.eval(&c.q, &c.age));
        }
    }
    Ok((times, values))
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Growth exponent: log-log fit of seed-averaged means over the tail half of
/// the checkpoints. Means are clamped below at one packet: the exponent
/// measures escape to infinity, and a system averaging less than one packet
/// reads as flat rather than as log-of-near-zero noise.
pub fn fit_exponent(times: &[u64], means: &[f64]) -> f64 {
    let tail = tail_half(times.len());
    let xs: Vec<f64> = times[tail..].iter().map(|&t| (t.max(1) as f64).ln()).collect();
    let ys: Vec<f64> = means[tail..].iter().map(|&m| m.max(1.0).ln()).collect();
    fit_slope(&xs, &ys)
}

/// Linear slope of the seed-averaged means over the tail half.
pub fn fit_linear_slope(times: &[u64], means: &[f64]) -> f64 {
    let tail = tail_half(times.len());
    let xs: Vec<f64> = times[tail..].iter().map(|&t| t as f64).collect();
    fit_slope(&xs, &means[tail..])
}

fn tail_half(len: usize) -> usize {
    len / 2
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Bootstrap standard error of the mean of `values` (resampling seeds with
/// replacement; deterministic).
pub fn bootstrap_se(values: &[f64], resamples: usize, seed: u64) -> f64 {
    use rand_chacha::rand_core::SeedableRng;
    if values.len() < 2 {
        return 0.0;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut total = 0.0;
        for _ in 0..values.len() {
            total += values[rng.random_range(0..values.len())];
        }
        means.push(total / values.len() as f64);
    }
    let m = mean(&means);
    let var = means.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (resamples as f64 - 1.0);
    var.sqrt()
}

const BOOTSTRAP_RESAMPLES: usize = 200;

/// Fits growth exponents and moments across seeded runs and classifies the
/// stability regime. Requires at least 30 seeds and horizon 1e4.
pub fn classify_stability(
    traces: &[RunTrace],
    series: SeriesKind,
) -> Result<StabilityReport, MetricsError> {
    const MIN_SEEDS: usize = 30;
    const MIN_HORIZON: u64 = 10_000;
    if traces.len() < MIN_SEEDS || traces.iter().any(|t| t.horizon < MIN_HORIZON) {
        return Err(MetricsError::InsufficientData {
            need: MIN_SEEDS,
            min_horizon: MIN_HORIZON,
            got: traces.len(),
        });
    }
    let (times, values) = series_by_checkpoint(traces, series)?;
    let means: Vec<f64> = values.iter().map(|v| mean(v)).collect();
    let exponent = fit_exponent(&times, &means);
    let linear_slope = fit_linear_slope(&times, &means);
    let moments = times
        .iter()
        .zip(&values)
        .map(|(&t, vals)| {
            let p2: Vec<f64> = vals.iter().map(|v| v * v).collect();
            let p4: Vec<f64> = vals.iter().map(|v| v * v * v * v).collect();
            MomentRow {
                t,
                mean: mean(vals),
                m2: mean(&p2),
                m4: mean(&p4),
                se_mean: bootstrap_se(vals, BOOTSTRAP_RESAMPLES, t ^ 0x51ab),
                se_m2: bootstrap_se(&p2, BOOTSTRAP_RESAMPLES, t ^ 0x52ab),
                se_m4: bootstrap_se(&p4, BOOTSTRAP_RESAMPLES, t ^ 0x54ab),
            }
        })
        .collect();
    Ok(StabilityReport {
        series,
        seeds: traces.len(),
        horizon: traces[0].horizon,
        exponent,
        linear_slope,
        classification: classify_exponent(exponent),
        moments,
    })
}
