//! Per-queue server-selection policies. The trait deliberately exposes only
//! the current time, the queue's own age, and its own past bandit feedback;
//! queue lengths are not visible to any policy, by construction.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::model::SystemSpec;
use crate::rng::{sub_rng, Role};

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("feedback at t={t} without a matching choose call")]
    OutOfOrder { t: u64 },
    #[error("coordinator requires the no-priority model")]
    WrongModel,
    #[error("spec does not fit the coordinated family: {reason}")]
    UnsupportedSpec { reason: String },
}

/// A server-selection policy for one queue.
///
/// `choose` is called exactly when the queue holds a packet; `feedback`
/// follows with the binary cleared bit for the same step.
pub trait Strategy: Send {
    fn choose(&mut self, t: u64, age: u64) -> usize;
    fn feedback(&mut self, chosen: usize, cleared: bool) -> Result<(), StrategyError>;
}

/// Always sends to one server.
#[derive(Debug, Clone)]
pub struct FixedServer {
    server: usize,
}

impl FixedServer {
    pub fn new(server: usize) -> Self {
        FixedServer { server }
    }
}

impl Strategy for FixedServer {
    fn choose(&mut self, _t: u64, _age: u64) -> usize {
        self.server
    }

    fn feedback(&mut self, _chosen: usize, _cleared: bool) -> Result<(), StrategyError> {
        Ok(())
    }
}

/// Constant choice of the highest-rate server.
pub fn top_server_strategy() -> FixedServer {
    FixedServer::new(0)
}

/// EXP3.P configuration. The published high-probability parameterization is
/// the default; every constant can be overridden.
#[derive(Debug, Clone)]
pub struct Exp3pConfig {
    pub arms: usize,
    /// Window length the guarantee is tuned for (also the restart period when
    /// freezing is on).
    pub window: u64,
    /// Desired per-window failure probability.
    pub delta: f64,
    /// Restart the weights at every window boundary, keeping the floor.
    pub freezing: bool,
    pub gamma: Option<f64>,
    pub learning_rate: Option<f64>,
    pub bonus: Option<f64>,
}

impl Exp3pConfig {
    pub fn new(arms: usize, window: u64, delta: f64) -> Self {
        Exp3pConfig {
            arms,
            window,
            delta,
            freezing: true,
            gamma: None,
            learning_rate: None,
            bonus: None,
        }
    }

    fn resolve(&self) -> (f64, f64, f64) {
        let m = self.arms as f64;
        let w = self.window as f64;
        let gamma = self.gamma.unwrap_or_else(|| {
            if self.arms <= 1 {
                0.0
            } else {
                (1.05 * (m * m.ln() / w).sqrt()).min(0.6)
            }
        });
        let eta = self.learning_rate.unwrap_or_else(|| 0.95 * (m.ln().max(1.0) / (w * m)).sqrt());
        let bonus = self.bonus.unwrap_or_else(|| ((m / self.delta).ln() / (w * m)).sqrt());
        (gamma, eta, bonus)
    }
}

/// EXP3.P with an explicit exploration floor and importance-weighted updates,
/// optionally restarted every window so the high-probability guarantee holds
/// on every window rather than a single fixed one.
pub struct Exp3p {
    arms: usize,
    window: u64,
    freezing: bool,
    gamma: f64,
    eta: f64,
    bonus: f64,
    log_weights: Vec<f64>,
    gains: Vec<f64>,
    rng: ChaCha12Rng,
    current_window: u64,
    pending: Option<(usize, Vec<f64>)>,
    t_last: u64,
}

impl Exp3p {
    pub fn new(cfg: Exp3pConfig, seed: u64) -> Self {
        let (gamma, eta, bonus) = cfg.resolve();
        Exp3p {
            arms: cfg.arms,
            window: cfg.window.max(1),
            freezing: cfg.freezing,
            gamma,
            eta,
            bonus,
            log_weights: vec![0.0; cfg.arms],
            gains: vec![0.0; cfg.arms],
            rng: sub_rng(seed, Role::Strategy, 0),
            current_window: 0,
            pending: None,
            t_last: 0,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Sampling distribution: exploration floor gamma/m plus the exponential
    /// weights.
    pub fn probabilities(&self) -> Vec<f64> {
        let mx = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = self.log_weights.iter().map(|&l| (l - mx).exp()).collect();
        let total: f64 = exps.iter().sum();
        let m = self.arms as f64;
        exps.iter().map(|e| (1.0 - self.gamma) * e / total + self.gamma / m).collect()
    }

    /// Cumulative importance-weighted reward estimate for an arm (reset at
    /// window boundaries when freezing).
    pub fn gain_estimate(&self, arm: usize) -> f64 {
        self.gains[arm]
    }

    fn maybe_restart(&mut self, t: u64) {
        let window = t / self.window;
        if self.freezing && window != self.current_window {
            self.log_weights.iter_mut().for_each(|w| *w = 0.0);
            self.gains.iter_mut().for_each(|g| *g = 0.0);
            self.pending = None;
        }
        self.current_window = window;
    }
}

impl Strategy for Exp3p {
    fn choose(&mut self, t: u64, _age: u64) -> usize {
        self.maybe_restart(t);
        self.t_last = t;
        let probs = self.probabilities();
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut arm = self.arms - 1;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                arm = i;
                break;
            }
        }
        self.pending = Some((arm, probs));
        arm
    }

    fn feedback(&mut self, chosen: usize, cleared: bool) -> Result<(), StrategyError> {
        let Some((arm, probs)) = self.pending.take() else {
            return Err(StrategyError::OutOfOrder { t: self.t_last });
        };
        if arm != chosen {
            return Err(StrategyError::OutOfOrder { t: self.t_last });
        }
        let reward_hat = if cleared { 1.0 / probs[arm] } else { 0.0 };
        self.gains[arm] += reward_hat;
        // optimistic gain estimate: (reward indicator + bonus) / p_i
        for i in 0..self.arms {
            let r = if i == arm { reward_hat } else { 0.0 };
            self.log_weights[i] += self.eta * (r + self.bonus / probs[i]);
        }
        let mx = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.log_weights.iter_mut().for_each(|w| *w -= mx);
        Ok(())
    }
}

/// Coordinated schedule realizing a per-step Nash equilibrium of the
/// no-priority model on the many-low-rate-queues family: a fixed number of
/// active low-rate queues join the high-rate queue at the top server, the
/// rest spread out to distinct low servers.
#[derive(Debug, Clone)]
pub struct NashCoordinator {
    n: usize,
    k_low: usize,
}

impl NashCoordinator {
    /// Validates the family shape (one high arrival rate, one high service
    /// rate, flat tails) and derives the number of low queues to co-locate
    /// from the Nash inequalities.
    pub fn for_spec(spec: &SystemSpec) -> Result<Self, StrategyError> {
        let n = spec.n();
        if n < 3 || spec.m() != n {
            return Err(StrategyError::UnsupportedSpec {
                reason: format!("need n = m >= 3, got n={n}, m={}", spec.m()),
            });
        }
        let mu = spec.mu();
        let mu_low = mu[1];
        if mu_low <= 0.0 || mu[1..].iter().any(|&u| u != mu_low) {
            return Err(StrategyError::UnsupportedSpec {
                reason: "low-rate servers must share one positive rate".into(),
            });
        }
        let lambda = spec.lambda();
        let lam_low = lambda[1];
        if lambda[1..].iter().any(|&l| l != lam_low) {
            return Err(StrategyError::UnsupportedSpec {
                reason: "low-rate queues must share one rate".into(),
            });
        }
        // largest k with mu_1/(k+1) >= mu_low: sharing the top server still
        // beats a private low server
        let k_low = (mu[0] / mu_low).floor() as usize - 1;
        if k_low == 0 || k_low + 1 >= n {
            return Err(StrategyError::UnsupportedSpec {
                reason: format!("derived k_low={k_low} outside (0, n-1)"),
            });
        }
        Ok(NashCoordinator { n, k_low })
    }

    pub fn k_low(&self) -> usize {
        self.k_low
    }

    /// Assigns servers for one step given which queues hold packets.
    ///
    /// The top server must see exactly k_low + 1 senders whenever that many
    /// queues are active: members then beat a private low server while a
    /// joiner would not, which is what makes every step an equilibrium. The
    /// high-rate queue takes a top slot when active (it owns no private
    /// server); remaining slots go to the lowest-index active low queues, and
    /// every other active low queue uses its own server.
    pub fn choices(&self, has_packet: &[bool]) -> Vec<Option<usize>> {
        assert_eq!(has_packet.len(), self.n);
        let mut out = vec![None; self.n];
        let mut top_slots = self.k_low + 1;
        if has_packet[0] {
            out[0] = Some(0);
            top_slots -= 1;
        }
        let mut filled = 0;
        for i in 1..self.n {
            if !has_packet[i] {
                continue;
            }
            if filled < top_slots {
                out[i] = Some(0);
                filled += 1;
            } else {
                out[i] = Some(i);
            }
        }
        out
    }
}

/// Builds the coordinator for a no-priority impossibility-family run.
/// `n_root` is the cube root of the intended system size and must match.
pub fn make_nash_coordinator(
    spec: &SystemSpec,
    n_root: u32,
) -> Result<NashCoordinator, StrategyError> {
    let expected = (n_root as usize).pow(3);
    if spec.n() != expected {
        return Err(StrategyError::UnsupportedSpec {
            reason: format!("expected n = n_root^3 = {expected}, got {}", spec.n()),
        });
    }
    NashCoordinator::for_spec(spec)
}

/// The no-priority family where coordinated selfish play starves the high
/// arrival queue: n = n_root^3 queues and servers, one high arrival rate
/// 2/n_root against a single 1/2-rate server, everything else flat.
pub fn impossibility_spec(n_root: u32) -> SystemSpec {
    assert!(n_root >= 3, "family needs n_root >= 3");
    let n = (n_root as usize).pow(3);
    let nr = n_root as f64;
    let lam_high = 2.0 / nr;
    let lam_low = 1.0 / (nr * nr);
    // c must satisfy n_root/(n_root + 2) < c < 1 so that sharing the top
    // server with k_low others is individually optimal
    let lower = nr / (nr + 2.0);
    let c = if lower < 0.75 { 0.75 } else { (lower + 1.0) / 2.0 };
    let mu_low = c / nr;
    let mut lambda = vec![lam_low; n];
    lambda[0] = lam_high;
    let mut mu = vec![mu_low; n];
    mu[0] = 0.5;
    SystemSpec::new(lambda, mu).expect("family rates are valid")
}

/// The half-slack tightness family: n queues of rate (n+1)/n^2, one rate-1
/// server and n-1 servers of rate (n-1)/n^2.
pub fn tightness_spec(n: usize) -> SystemSpec {
    assert!(n >= 2);
    let nf = n as f64;
    let lambda = vec![(nf + 1.0) / (nf * nf); n];
    let mut mu = vec![(nf - 1.0) / (nf * nf); n];
    mu[0] = 1.0;
    SystemSpec::new(lambda, mu).expect("family rates are valid")
}

/// Checks that every sending queue's assigned server maximizes its success
/// probability in the no-priority model, holding everyone else's assignment
/// fixed: success at server j with s senders is mu_j / s for a member and
/// mu_j / (s + 1) for a joiner.
pub fn nash_audit_step(mu: &[f64], choices: &[Option<usize>]) -> bool {
    let m = mu.len();
    let mut count = vec![0u64; m];
    for c in choices.iter().flatten() {
        count[*c] += 1;
    }
    for &choice in choices {
        let Some(j) = choice else { continue };
        let current = mu[j] / count[j] as f64;
        for alt in 0..m {
            if alt == j {
                continue;
            }
            let deviation = mu[alt] / (count[alt] + 1) as f64;
            if deviation > current + 1e-12 {
                return false;
            }
        }
    }
    true
}
