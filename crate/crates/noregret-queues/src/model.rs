//! System specification: validated arrival and service rates, the shared-prefix
//! preprocessing step, central feasibility, and the slack margin that the
//! learning guarantees are parameterized by.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("lambda must be non-empty")]
    EmptyLambda,
    #[error("mu must be non-empty")]
    EmptyMu,
    #[error("arrival rate lambda[{index}] = {value} outside (0, 1]")]
    LambdaOutOfRange { index: usize, value: f64 },
    #[error("service rate mu[{index}] = {value} outside [0, 1]")]
    MuOutOfRange { index: usize, value: f64 },
    #[error("degenerate system: removing the shared prefix of rate-1 entries leaves nothing to schedule")]
    DegenerateSystem,
}

/// Validated queuing system parameters.
///
/// Rates are sorted non-increasing on construction (the labeling convention is
/// an ordering, not a constraint on callers); original positions are retained
/// for reporting. Immutable after construction and safe to share across
/// threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    lambda: Vec<f64>,
    mu: Vec<f64>,
    queue_order: Vec<usize>,
    server_order: Vec<usize>,
}

impl SystemSpec {
    pub fn new(lambda: Vec<f64>, mu: Vec<f64>) -> Result<Self, ModelError> {
        if lambda.is_empty() {
            return Err(ModelError::EmptyLambda);
        }
        if mu.is_empty() {
            return Err(ModelError::EmptyMu);
        }
        for (i, &l) in lambda.iter().enumerate() {
            if !(l > 0.0 && l <= 1.0) {
                return Err(ModelError::LambdaOutOfRange { index: i, value: l });
            }
        }
        for (j, &u) in mu.iter().enumerate() {
            if !(0.0..=1.0).contains(&u) {
                return Err(ModelError::MuOutOfRange { index: j, value: u });
            }
        }
        let (lambda, queue_order) = sort_desc_with_order(lambda);
        let (mu, server_order) = sort_desc_with_order(mu);
        Ok(SystemSpec { lambda, mu, queue_order, server_order })
    }

    /// Number of queues.
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// Number of servers.
    pub fn m(&self) -> usize {
        self.mu.len()
    }

    /// Arrival rates, sorted non-increasing.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Service rates, sorted non-increasing.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Original position of sorted queue `i` in the caller-supplied vector.
    pub fn original_queue_index(&self, i: usize) -> usize {
        self.queue_order[i]
    }

    /// Original position of sorted server `j` in the caller-supplied vector.
    pub fn original_server_index(&self, j: usize) -> usize {
        self.server_order[j]
    }

    /// Common comparison length: max(n, m).
    pub fn padded_len(&self) -> usize {
        self.n().max(self.m())
    }

    /// Arrival rates padded with zeros to the common length.
    pub fn padded_lambda(&self) -> Vec<f64> {
        let mut v = self.lambda.clone();
        v.resize(self.padded_len(), 0.0);
        v
    }

    /// Service rates padded with zeros to the common length.
    pub fn padded_mu(&self) -> Vec<f64> {
        let mut v = self.mu.clone();
        v.resize(self.padded_len(), 0.0);
        v
    }
}

fn sort_desc_with_order(values: Vec<f64>) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    let sorted = order.iter().map(|&i| values[i]).collect();
    (sorted, order)
}

/// Removes the maximal equal-length prefix of rate-1 entries from both vectors.
///
/// Queues and servers that both run at rate 1 can be matched to each other on
/// every step, so stability is dictated by the remainder.
pub fn preprocess(spec: &SystemSpec) -> Result<SystemSpec, ModelError> {
    let ones_lambda = spec.lambda.iter().take_while(|&&v| v == 1.0).count();
    let ones_mu = spec.mu.iter().take_while(|&&v| v == 1.0).count();
    let k = ones_lambda.min(ones_mu);
    let lambda = spec.lambda[k..].to_vec();
    let mu = spec.mu[k..].to_vec();
    if lambda.is_empty() || mu.is_empty() {
        return Err(ModelError::DegenerateSystem);
    }
    if lambda.iter().all(|&v| v == 0.0) && mu.iter().all(|&v| v == 0.0) {
        return Err(ModelError::DegenerateSystem);
    }
    Ok(SystemSpec {
        lambda,
        mu,
        queue_order: spec.queue_order[k..].to_vec(),
        server_order: spec.server_order[k..].to_vec(),
    })
}

/// Outcome of the prefix-sum comparison, with the equality case reported
/// distinctly so the boundary can be targeted by tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    /// Every prefix of service rates strictly exceeds the arrival prefix.
    Feasible,
    /// First prefix (1-based) where the sums are exactly equal.
    BoundaryAt(usize),
    /// First prefix (1-based) where the service sum falls strictly below.
    InfeasibleAt(usize),
}

/// Prefix-sum dominance check on the zero-padded rate vectors.
///
/// Comparisons are exact; no epsilon is applied.
pub fn feasibility(spec: &SystemSpec) -> Feasibility {
    let lambda = spec.padded_lambda();
    let mu = spec.padded_mu();
    let mut sum_l = 0.0;
    let mut sum_m = 0.0;
    for k in 0..lambda.len() {
        sum_l += lambda[k];
        sum_m += mu[k];
        if sum_m < sum_l {
            return Feasibility::InfeasibleAt(k + 1);
        }
        if sum_m == sum_l {
            return Feasibility::BoundaryAt(k + 1);
        }
    }
    Feasibility::Feasible
}

/// True iff every prefix of service rates strictly dominates the arrival
/// prefix, i.e. a centralized scheduler can keep the system stable.
pub fn check_feasibility(spec: &SystemSpec) -> bool {
    matches!(feasibility(spec), Feasibility::Feasible)
}

/// Slack margin of the half-rate feasibility requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackReport {
    /// Plain central feasibility of the system (factor 1).
    pub feasible: bool,
    /// Maximal eta >= 0 with (1 - eta)/2 * prefix(mu) >= prefix(lambda) for
    /// every prefix; `None` when no eta > 0 exists.
    pub eta: Option<f64>,
    /// Smallest prefix (1-based) where even eta = 0 fails, when it does.
    pub violating_prefix: Option<usize>,
}

/// Computes the maximal slack eta for the half-rate feasibility requirement.
///
/// eta is the minimum over prefixes k of `1 - 2*prefix_lambda(k)/prefix_mu(k)`;
/// a negative minimum means the system is infeasible at factor 2 and eta is
/// reported as absent.
pub fn max_slack(spec: &SystemSpec) -> SlackReport {
    let feasible = check_feasibility(spec);
    let lambda = spec.padded_lambda();
    let mu = spec.padded_mu();
    let mut sum_l = 0.0;
    let mut sum_m = 0.0;
    let mut eta = f64::INFINITY;
    let mut violating = None;
    for k in 0..lambda.len() {
        sum_l += lambda[k];
        sum_m += mu[k];
        let e = if sum_m > 0.0 {
            1.0 - 2.0 * sum_l / sum_m
        } else {
            // positive arrivals against zero total service: no eta works
            f64::NEG_INFINITY
        };
        if e < eta {
            eta = e;
        }
        if e < 0.0 && violating.is_none() {
            violating = Some(k + 1);
        }
    }
    if eta < 0.0 {
        SlackReport { feasible, eta: None, violating_prefix: violating }
    } else {
        SlackReport { feasible, eta: Some(eta), violating_prefix: None }
    }
}
