//! Random sources for the engines. Arrival streams are generated as geometric
//! gaps between packets and memoized, so the Bernoulli view (standard engine)
//! and the gap view (dual engine) describe the same packet sequence. Server
//! coins are memoized per (server, step) and consumed whether or not a packet
//! is sent, which keeps counterfactuals well-defined and lets two engines
//! driven from one source see identical randomness.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::model::SystemSpec;
use crate::rng::{sub_rng, Role};

/// Geometric(p) on {1, 2, ...}: number of Bernoulli trials to first success.
fn sample_geometric<R: Rng>(rng: &mut R, p: f64) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    let u: f64 = rng.random();
    let g = ((1.0 - u).ln() / (1.0 - p).ln()).floor();
    (g as u64).saturating_add(1)
}

enum Source {
    Random(ChaCha12Rng),
    /// Finite scripted stream for deterministic tests and replay.
    Scripted,
}

/// Per-queue packet arrival process. `times[k]` is the arrival step of the
/// k-th packet; `gaps[k]` the geometric gap that produced it.
pub struct ArrivalStream {
    lambda: f64,
    source: Source,
    gaps: Vec<u64>,
    times: Vec<u64>,
}

impl ArrivalStream {
    pub fn new(lambda: f64, rng: ChaCha12Rng) -> Self {
        ArrivalStream { lambda, source: Source::Random(rng), gaps: Vec::new(), times: Vec::new() }
    }

    /// Fixed arrival schedule; queries past the last scripted packet report no
    /// arrivals and `gap` panics.
    pub fn scripted(arrival_times: Vec<u64>) -> Self {
        let mut gaps = Vec::with_capacity(arrival_times.len());
        let mut prev: Option<u64> = None;
        for &t in &arrival_times {
            match prev {
                None => gaps.push(t + 1),
                Some(p) => {
                    assert!(t > p, "scripted arrival times must be strictly increasing");
                    gaps.push(t - p);
                }
            }
            prev = Some(t);
        }
        ArrivalStream { lambda: 0.0, source: Source::Scripted, gaps, times: arrival_times }
    }

    fn extend_one(&mut self) -> bool {
        match &mut self.source {
            Source::Random(rng) => {
                let g = sample_geometric(rng, self.lambda);
                let t = match self.times.last() {
                    None => g - 1,
                    Some(&prev) => prev + g,
                };
                self.gaps.push(g);
                self.times.push(t);
                true
            }
            Source::Scripted => false,
        }
    }

    fn ensure_time(&mut self, t: u64) {
        while self.times.last().is_none_or(|&last| last < t) {
            if !self.extend_one() {
                return;
            }
        }
    }

    fn ensure_len(&mut self, k: usize) {
        while self.gaps.len() < k {
            if !self.extend_one() {
                panic!("scripted arrival stream exhausted at gap {k}");
            }
        }
    }

    /// Whether a packet arrives at step `t`.
    pub fn has_arrival_at(&mut self, t: u64) -> bool {
        self.ensure_time(t);
        self.times.binary_search(&t).is_ok()
    }

    /// k-th geometric gap (0-based; gap 0 produced the first packet).
    pub fn gap(&mut self, k: usize) -> u64 {
        self.ensure_len(k + 1);
        self.gaps[k]
    }

    /// Arrival step of the first packet.
    pub fn first_arrival_time(&mut self) -> u64 {
        self.ensure_len(1);
        self.times[0]
    }

    /// Number of packets with arrival step in `[lo, hi]` (empty when lo > hi).
    pub fn count_in(&mut self, lo: u64, hi: u64) -> u64 {
        if lo > hi {
            return 0;
        }
        self.ensure_time(hi);
        let a = self.times.partition_point(|&t| t < lo);
        let b = self.times.partition_point(|&t| t <= hi);
        (b - a) as u64
    }
}

/// Per-server Bernoulli success process, memoized by step.
pub struct CoinStream {
    mu: f64,
    source: Source,
    coins: Vec<bool>,
}

impl CoinStream {
    pub fn new(mu: f64, rng: ChaCha12Rng) -> Self {
        CoinStream { mu, source: Source::Random(rng), coins: Vec::new() }
    }

    pub fn scripted(coins: Vec<bool>) -> Self {
        CoinStream { mu: 0.0, source: Source::Scripted, coins }
    }

    /// Coin value at step `t`; one draw per (server, step), at most.
    pub fn coin_at(&mut self, t: u64) -> bool {
        let idx = usize::try_from(t).expect("step fits usize");
        while self.coins.len() <= idx {
            match &mut self.source {
                Source::Random(rng) => {
                    let draw = rng.random::<f64>() < self.mu;
                    self.coins.push(draw);
                }
                Source::Scripted => panic!("scripted coin stream exhausted at step {t}"),
            }
        }
        self.coins[idx]
    }
}

/// All random sub-streams for one run, split per role from a single seed.
pub struct SimStreams {
    pub arrivals: Vec<ArrivalStream>,
    pub coins: Vec<CoinStream>,
    pub(crate) selection: ChaCha12Rng,
    pub(crate) counterfactual: ChaCha12Rng,
}

impl SimStreams {
    pub fn new(spec: &SystemSpec, seed: u64) -> Self {
        let arrivals = spec
            .lambda()
            .iter()
            .enumerate()
            .map(|(i, &l)| ArrivalStream::new(l, sub_rng(seed, Role::Arrival, i as u64)))
            .collect();
        let coins = spec
            .mu()
            .iter()
            .enumerate()
            .map(|(j, &u)| CoinStream::new(u, sub_rng(seed, Role::Coin, j as u64)))
            .collect();
        SimStreams {
            arrivals,
            coins,
            selection: sub_rng(seed, Role::Selection, 0),
            counterfactual: sub_rng(seed, Role::Counterfactual, 0),
        }
    }

    /// Deterministic scripted streams for tests and replay.
    pub fn scripted(arrival_times: Vec<Vec<u64>>, coins: Vec<Vec<bool>>) -> Self {
        SimStreams {
            arrivals: arrival_times.into_iter().map(ArrivalStream::scripted).collect(),
            coins: coins.into_iter().map(CoinStream::scripted).collect(),
            selection: rand_chacha::rand_core::SeedableRng::seed_from_u64(0),
            counterfactual: rand_chacha::rand_core::SeedableRng::seed_from_u64(1),
        }
    }

    pub fn n(&self) -> usize {
        self.arrivals.len()
    }

    pub fn m(&self) -> usize {
        self.coins.len()
    }
}
