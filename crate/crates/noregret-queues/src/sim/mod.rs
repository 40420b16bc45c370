//! The three simulation engines: the standard priority model (full queue
//! contents with timestamps), the dual deferred-decision model (oldest
//! timestamp only, geometric gaps on clears), and the no-priority variant
//! where servers pick uniformly among senders. A coupling harness drives the
//! standard and dual engines from one random source and checks that their
//! ages agree exactly at every step.

mod runner;
mod streams;

pub use runner::{
    log8_checkpoints, run_coupled, run_coupled_with, run_single, Checkpoint, EngineModel,
    NashAuditSummary, Policy, PotentialPoint, RunConfig, RunTrace, WindowRegret, WindowSchedule,
};
pub use streams::{ArrivalStream, CoinStream, SimStreams};

use std::collections::VecDeque;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("queue {queue} supplied a server choice at t={t} but holds no packet")]
    ChoiceFromEmptyQueue { queue: usize, t: u64 },
    #[error("queue {queue} chose server {server}, but only {servers} servers exist")]
    InvalidServer { queue: usize, server: usize, servers: usize },
    #[error("expected {expected} choices, got {got}")]
    ChoiceCountMismatch { expected: usize, got: usize },
}

/// How a server picks among the packets sent to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discipline {
    /// Oldest timestamp wins; ties broken by lowest queue index.
    OldestFirst,
    /// Uniformly random among senders; timestamps ignored.
    UniformRandom,
}

/// Result of one engine step.
///
/// The counterfactual row records, for every (queue, server) pair, whether the
/// queue would have cleared a packet had it sent there this step, against the
/// other queues' realized choices. It is always materialized; the regret
/// ledger consumes it unchanged.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub t: u64,
    /// Server chosen by each queue this step, if it sent.
    pub chosen: Vec<Option<usize>>,
    /// Whether each queue cleared a packet.
    pub cleared: Vec<bool>,
    /// Winning queue per server, if any sender was selected.
    pub server_winner: Vec<Option<usize>>,
    /// Coin value per server; consumed every step regardless of senders.
    pub server_coin: Vec<bool>,
    /// Ages at decision time (after this step's arrivals), all queues.
    pub ages: Vec<u64>,
    /// Row-major n x m would-have-cleared indicators.
    pub counterfactual: Vec<u8>,
}

impl StepOutcome {
    pub fn would_clear(&self, queue: usize, server: usize) -> bool {
        let m = self.server_coin.len();
        self.counterfactual[queue * m + server] != 0
    }
}

/// Full state of the standard model: every queue holds the ordered timestamps
/// of its unprocessed packets.
pub struct StandardState {
    t: u64,
    queues: Vec<VecDeque<u64>>,
    /// Queue sizes at the start of the current step, before arrivals.
    q_start: Vec<u64>,
    arrivals_applied: bool,
}

impl StandardState {
    pub fn new(n: usize) -> Self {
        StandardState {
            t: 0,
            queues: vec![VecDeque::new(); n],
            q_start: vec![0; n],
            arrivals_applied: false,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn n(&self) -> usize {
        self.queues.len()
    }

    /// Queue sizes at the beginning of the current step, before sampling new
    /// packets (valid after `decision_ages`).
    pub fn q_sizes(&self) -> &[u64] {
        &self.q_start
    }

    /// Oldest unprocessed timestamp per queue, if any.
    pub fn oldest(&self, queue: usize) -> Option<u64> {
        self.queues[queue].front().copied()
    }

    /// Applies this step's arrivals (idempotent) and returns the decision-time
    /// age per queue; `None` means the queue holds no packet and must not send.
    pub fn decision_ages(&mut self, streams: &mut SimStreams) -> Vec<Option<u64>> {
        if !self.arrivals_applied {
            for (i, q) in self.queues.iter_mut().enumerate() {
                self.q_start[i] = q.len() as u64;
                if streams.arrivals[i].has_arrival_at(self.t) {
                    q.push_back(self.t);
                }
            }
            self.arrivals_applied = true;
        }
        self.queues.iter().map(|q| q.front().map(|&ts| self.t - ts)).collect()
    }
}

/// State of the dual deferred-decision model: only the oldest unprocessed
/// timestamp per queue. A timestamp beyond the current step means the queue
/// has cleared everything and its next packet arrives in the future.
pub struct DualState {
    t: u64,
    oldest: Vec<u64>,
    cleared_count: Vec<u64>,
    initialized: bool,
}

impl DualState {
    pub fn new(n: usize) -> Self {
        DualState { t: 0, oldest: vec![0; n], cleared_count: vec![0; n], initialized: false }
    }

    /// Test/diagnostic constructor with explicit oldest timestamps at time `t`.
    /// Gap draws for clears start at index `gap_start`.
    pub fn with_oldest(oldest: Vec<u64>, t: u64, gap_start: u64) -> Self {
        let n = oldest.len();
        DualState { t, oldest, cleared_count: vec![gap_start; n], initialized: true }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn n(&self) -> usize {
        self.oldest.len()
    }

    /// Oldest unprocessed timestamp per queue (may exceed the current step).
    pub fn oldest_timestamps(&self) -> &[u64] {
        &self.oldest
    }

    fn ensure_init(&mut self, streams: &mut SimStreams) {
        if !self.initialized {
            for (i, o) in self.oldest.iter_mut().enumerate() {
                *o = streams.arrivals[i].first_arrival_time();
            }
            self.initialized = true;
        }
    }

    /// Decision-time age per queue; `None` when the oldest packet has not
    /// arrived yet.
    pub fn decision_ages(&mut self, streams: &mut SimStreams) -> Vec<Option<u64>> {
        self.ensure_init(streams);
        self.oldest
            .iter()
            .map(|&o| if o <= self.t { Some(self.t - o) } else { None })
            .collect()
    }

    /// Queue size implied by the coupled arrival stream: packets that arrived
    /// before the current step and have not been cleared.
    pub fn implied_q(&mut self, streams: &mut SimStreams) -> Vec<u64> {
        self.ensure_init(streams);
        let t = self.t;
        self.oldest
            .iter()
            .enumerate()
            .map(|(i, &o)| if t == 0 { 0 } else { streams.arrivals[i].count_in(o, t - 1) })
            .collect()
    }
}

/// One step of the standard priority model.
pub fn step_standard(
    state: &mut StandardState,
    streams: &mut SimStreams,
    choices: &[Option<usize>],
) -> Result<StepOutcome, SimError> {
    step_standard_impl(state, streams, choices, Discipline::OldestFirst)
}

/// One step of the no-priority variant: same state, uniform winner selection.
pub fn step_no_priority(
    state: &mut StandardState,
    streams: &mut SimStreams,
    choices: &[Option<usize>],
) -> Result<StepOutcome, SimError> {
    step_standard_impl(state, streams, choices, Discipline::UniformRandom)
}

fn step_standard_impl(
    state: &mut StandardState,
    streams: &mut SimStreams,
    choices: &[Option<usize>],
    discipline: Discipline,
) -> Result<StepOutcome, SimError> {
    let n = state.n();
    let m = streams.m();
    let t = state.t;
    let ages = state.decision_ages(streams);
    validate_choices(choices, &ages, t, n, m)?;

    let keys: Vec<Option<u64>> = (0..n).map(|i| state.queues[i].front().copied()).collect();
    let resolution = resolve_servers(streams, choices, &keys, t, m, discipline);

    let mut cleared = vec![false; n];
    for j in 0..m {
        if resolution.coin[j] {
            if let Some(w) = resolution.winner[j] {
                state.queues[w].pop_front();
                cleared[w] = true;
            }
        }
    }

    let counterfactual =
        counterfactual_rows(streams, choices, &keys, &resolution, &cleared, discipline);

    // recurrence: Q_{t+1} = Q_t + B_t - S_t with at most one arrival per step
    #[cfg(debug_assertions)]
    for i in 0..n {
        let arrival = u64::from(streams.arrivals[i].has_arrival_at(t));
        debug_assert_eq!(
            state.queues[i].len() as u64,
            state.q_start[i] + arrival - u64::from(cleared[i]),
            "recurrence violated at queue {i}, t={t}"
        );
    }

    let ages_flat = ages.iter().map(|a| a.unwrap_or(0)).collect();
    state.t += 1;
    state.arrivals_applied = false;
    Ok(StepOutcome {
        t,
        chosen: choices.to_vec(),
        cleared,
        server_winner: resolution.winner,
        server_coin: resolution.coin,
        ages: ages_flat,
        counterfactual,
    })
}

/// One step of the dual model: priority semantics on ages; a cleared queue's
/// oldest timestamp advances by a fresh geometric gap.
pub fn step_dual(
    state: &mut DualState,
    streams: &mut SimStreams,
    choices: &[Option<usize>],
) -> Result<StepOutcome, SimError> {
    let n = state.n();
    let m = streams.m();
    let t = state.t;
    let ages = state.decision_ages(streams);
    validate_choices(choices, &ages, t, n, m)?;

    let keys: Vec<Option<u64>> =
        (0..n).map(|i| if state.oldest[i] <= t { Some(state.oldest[i]) } else { None }).collect();
    let resolution = resolve_servers(streams, choices, &keys, t, m, Discipline::OldestFirst);

    let mut cleared = vec![false; n];
    for j in 0..m {
        if resolution.coin[j] {
            if let Some(w) = resolution.winner[j] {
                let gap_index = state.cleared_count[w] + 1;
                let gap = streams.arrivals[w].gap(gap_index as usize);
                state.oldest[w] += gap;
                state.cleared_count[w] += 1;
                cleared[w] = true;
            }
        }
    }

    let counterfactual = counterfactual_rows(
        streams,
        choices,
        &keys,
        &resolution,
        &cleared,
        Discipline::OldestFirst,
    );

    let ages_flat = ages.iter().map(|a| a.unwrap_or(0)).collect();
    state.t += 1;
    Ok(StepOutcome {
        t,
        chosen: choices.to_vec(),
        cleared,
        server_winner: resolution.winner,
        server_coin: resolution.coin,
        ages: ages_flat,
        counterfactual,
    })
}

fn validate_choices(
    choices: &[Option<usize>],
    ages: &[Option<u64>],
    t: u64,
    n: usize,
    m: usize,
) -> Result<(), SimError> {
    if choices.len() != n {
        return Err(SimError::ChoiceCountMismatch { expected: n, got: choices.len() });
    }
    for (i, c) in choices.iter().enumerate() {
        if let Some(j) = c {
            if ages[i].is_none() {
                return Err(SimError::ChoiceFromEmptyQueue { queue: i, t });
            }
            if *j >= m {
                return Err(SimError::InvalidServer { queue: i, server: *j, servers: m });
            }
        }
        // A queue holding a packet may be told to idle (central matchings
        // can assign virtual servers); that is not an error.
    }
    Ok(())
}

struct Resolution {
    senders: Vec<Vec<usize>>,
    winner: Vec<Option<usize>>,
    coin: Vec<bool>,
}

fn resolve_servers(
    streams: &mut SimStreams,
    choices: &[Option<usize>],
    keys: &[Option<u64>],
    t: u64,
    m: usize,
    discipline: Discipline,
) -> Resolution {
    let mut senders: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, c) in choices.iter().enumerate() {
        if let Some(j) = c {
            senders[*j].push(i);
        }
    }
    let mut winner = vec![None; m];
    let mut coin = vec![false; m];
    for j in 0..m {
        coin[j] = streams.coins[j].coin_at(t);
        winner[j] = match discipline {
            Discipline::OldestFirst => senders[j]
                .iter()
                .copied()
                .min_by_key(|&i| (keys[i].expect("sender holds a packet"), i)),
            Discipline::UniformRandom => {
                if senders[j].len() >= 2 {
                    let pick = streams.selection.random_range(0..senders[j].len());
                    Some(senders[j][pick])
                } else {
                    senders[j].first().copied()
                }
            }
        };
    }
    Resolution { senders, winner, coin }
}

/// Would queue `i` have cleared at server `j` this step, holding everyone
/// else's realized sends fixed and excluding `i`'s own send?
///
/// Priority model: `i` must beat every other actual sender at `j` under the
/// (timestamp, index) order. No-priority model: a realized uniform pick among
/// the actual senders plus `i`, drawn from a dedicated sub-stream so the
/// hypothetical never perturbs the actual process.
fn counterfactual_rows(
    streams: &mut SimStreams,
    choices: &[Option<usize>],
    keys: &[Option<u64>],
    resolution: &Resolution,
    cleared: &[bool],
    discipline: Discipline,
) -> Vec<u8> {
    let n = choices.len();
    let m = resolution.coin.len();
    let mut out = vec![0u8; n * m];
    match discipline {
        Discipline::OldestFirst => {
            // best and second-best sender key per server
            let mut best: Vec<Option<(u64, usize)>> = vec![None; m];
            let mut second: Vec<Option<(u64, usize)>> = vec![None; m];
            for j in 0..m {
                for &i in &resolution.senders[j] {
                    let key = (keys[i].unwrap(), i);
                    match best[j] {
                        None => best[j] = Some(key),
                        Some(b) if key < b => {
                            second[j] = Some(b);
                            best[j] = Some(key);
                        }
                        Some(_) => match second[j] {
                            None => second[j] = Some(key),
                            Some(s) if key < s => second[j] = Some(key),
                            Some(_) => {}
                        },
                    }
                }
            }
            for i in 0..n {
                let Some(ts) = keys[i] else { continue };
                let key = (ts, i);
                for j in 0..m {
                    if !resolution.coin[j] {
                        continue;
                    }
                    let rival = if choices[i] == Some(j) {
                        if best[j] == Some(key) {
                            second[j]
                        } else {
                            best[j]
                        }
                    } else {
                        best[j]
                    };
                    if rival.is_none_or(|r| key < r) {
                        out[i * m + j] = 1;
                    }
                }
            }
        }
        Discipline::UniformRandom => {
            for i in 0..n {
                if keys[i].is_none() {
                    continue;
                }
                for j in 0..m {
                    if choices[i] == Some(j) {
                        out[i * m + j] = cleared[i] as u8;
                        continue;
                    }
                    if !resolution.coin[j] {
                        continue;
                    }
                    let k = resolution.senders[j].len();
                    if k == 0 {
                        out[i * m + j] = 1;
                    } else {
                        // candidates = senders ∪ {i}, ordered by queue index
                        let pos = resolution.senders[j].partition_point(|&s| s < i);
                        let pick = streams.counterfactual.random_range(0..k + 1);
                        out[i * m + j] = (pick == pos) as u8;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_arrivals(n: usize) -> Vec<Vec<u64>> {
        vec![Vec::new(); n]
    }

    #[test]
    fn single_queue_clears_on_coin() {
        let mut streams = SimStreams::scripted(vec![vec![0]], vec![vec![true, true]]);
        let mut state = StandardState::new(1);
        let ages = state.decision_ages(&mut streams);
        assert_eq!(ages, vec![Some(0)]);
        let out = step_standard(&mut state, &mut streams, &[Some(0)]).unwrap();
        assert!(out.cleared[0]);
        assert_eq!(out.server_winner[0], Some(0));
        let ages = state.decision_ages(&mut streams);
        assert_eq!(ages, vec![None], "queue drained");
    }

    #[test]
    fn oldest_timestamp_wins_at_server() {
        // queue 0 arrives at 7, queue 1 at 3; both send to server 0 at t=8
        let mut streams =
            SimStreams::scripted(vec![vec![7], vec![3]], vec![vec![true; 16]]);
        let mut state = StandardState::new(2);
        for _ in 0..8 {
            state.decision_ages(&mut streams);
            // idle both queues until t=8
            let choices = vec![None, None];
            step_standard(&mut state, &mut streams, &choices).unwrap();
        }
        let ages = state.decision_ages(&mut streams);
        assert_eq!(ages, vec![Some(1), Some(5)]);
        let out = step_standard(&mut state, &mut streams, &[Some(0), Some(0)]).unwrap();
        assert!(!out.cleared[0]);
        assert!(out.cleared[1], "older packet (t=3) wins");
    }

    #[test]
    fn equal_timestamps_lowest_index_wins() {
        // two queues tied at the server: the lower index clears; a third,
        // younger queue never preempts them
        for (tied_a, tied_b) in [(0usize, 1usize), (1, 2)] {
            let mut arrivals = vec![Vec::new(); 3];
            arrivals[tied_a] = vec![5];
            arrivals[tied_b] = vec![5];
            let third = 3 - tied_a - tied_b;
            arrivals[third] = vec![6];
            let mut streams = SimStreams::scripted(arrivals, vec![vec![true; 9]]);
            let mut state = StandardState::new(3);
            for _ in 0..7 {
                state.decision_ages(&mut streams);
                step_standard(&mut state, &mut streams, &[None, None, None]).unwrap();
            }
            let ages = state.decision_ages(&mut streams);
            assert!(ages.iter().all(|a| a.is_some()));
            let out =
                step_standard(&mut state, &mut streams, &[Some(0), Some(0), Some(0)]).unwrap();
            assert!(out.cleared[tied_a], "lowest tied index wins");
            assert_eq!(out.cleared.iter().filter(|&&c| c).count(), 1);
        }
    }

    #[test]
    fn choice_from_empty_queue_is_rejected() {
        let mut streams = SimStreams::scripted(no_arrivals(1), vec![vec![true]]);
        let mut state = StandardState::new(1);
        state.decision_ages(&mut streams);
        let err = step_standard(&mut state, &mut streams, &[Some(0)]).unwrap_err();
        assert_eq!(err, SimError::ChoiceFromEmptyQueue { queue: 0, t: 0 });
    }

    #[test]
    fn coin_consumed_without_senders() {
        // scripted coins run out exactly at the horizon if consumed every step
        let mut streams = SimStreams::scripted(no_arrivals(1), vec![vec![true, false, true]]);
        let mut state = StandardState::new(1);
        for _ in 0..3 {
            state.decision_ages(&mut streams);
            let out = step_standard(&mut state, &mut streams, &[None]).unwrap();
            assert_eq!(out.server_winner[0], None);
        }
        // a fourth step would panic on the exhausted scripted stream
    }

    #[test]
    fn dual_clear_advances_by_gap() {
        // oldest=2 at t=10; clearing draws gap index 1
        let mut streams = SimStreams::scripted(vec![vec![2, 6]], vec![vec![true; 12]]);
        let mut state = DualState::with_oldest(vec![2], 10, 0);
        let ages = state.decision_ages(&mut streams);
        assert_eq!(ages, vec![Some(8)]);
        let out = step_dual(&mut state, &mut streams, &[Some(0)]).unwrap();
        assert!(out.cleared[0]);
        assert_eq!(state.oldest_timestamps(), &[6], "2 + gap(1)=4");
        let ages = state.decision_ages(&mut streams);
        assert_eq!(ages, vec![Some(5)], "age 11 - 6");
    }

    #[test]
    fn dual_future_packet_cannot_send() {
        let mut streams = SimStreams::scripted(vec![vec![12]], vec![vec![true; 12]]);
        let mut state = DualState::new(1);
        for t in 0..11u64 {
            let ages = state.decision_ages(&mut streams);
            if t < 12 {
                assert_eq!(ages, vec![None]);
            }
            let err = step_dual(&mut state, &mut streams, &[Some(0)]).unwrap_err();
            assert_eq!(err, SimError::ChoiceFromEmptyQueue { queue: 0, t });
            step_dual(&mut state, &mut streams, &[None]).unwrap();
        }
    }

    #[test]
    fn dual_no_clear_keeps_timestamp() {
        let mut streams = SimStreams::scripted(vec![vec![0]], vec![vec![false, false]]);
        let mut state = DualState::new(1);
        state.decision_ages(&mut streams);
        step_dual(&mut state, &mut streams, &[Some(0)]).unwrap();
        assert_eq!(state.oldest_timestamps(), &[0]);
        let ages = state.decision_ages(&mut streams);
        assert_eq!(ages, vec![Some(1)], "age grows by 1");
    }

    #[test]
    fn no_priority_single_sender_needs_coin() {
        let mut streams = SimStreams::scripted(vec![vec![0]], vec![vec![false]]);
        let mut state = StandardState::new(1);
        state.decision_ages(&mut streams);
        let out = step_no_priority(&mut state, &mut streams, &[Some(0)]).unwrap();
        assert!(!out.cleared[0]);
    }

    #[test]
    fn no_priority_uniform_among_senders() {
        use crate::model::SystemSpec;
        // three always-full queues contending for one server with mu=1
        let spec = SystemSpec::new(vec![1.0, 1.0, 1.0], vec![1.0]).unwrap();
        let mut streams = SimStreams::new(&spec, 42);
        let mut state = StandardState::new(3);
        let mut wins = [0u64; 3];
        let trials = 100_000;
        for _ in 0..trials {
            state.decision_ages(&mut streams);
            let out =
                step_no_priority(&mut state, &mut streams, &[Some(0), Some(0), Some(0)]).unwrap();
            for i in 0..3 {
                if out.cleared[i] {
                    wins[i] += 1;
                }
            }
        }
        for i in 0..3 {
            let f = wins[i] as f64 / trials as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.01, "queue {i} frequency {f}");
        }
    }

    #[test]
    fn counterfactual_consistency_with_realized() {
        use crate::model::SystemSpec;
        let spec = SystemSpec::new(vec![0.7, 0.5, 0.3], vec![0.8, 0.4]).unwrap();
        for discipline in [Discipline::OldestFirst, Discipline::UniformRandom] {
            let mut streams = SimStreams::new(&spec, 5);
            let mut state = StandardState::new(3);
            let mut strat_rng = crate::rng::sub_rng(5, crate::rng::Role::Strategy, 0);
            for _ in 0..2000 {
                let ages = state.decision_ages(&mut streams);
                let choices: Vec<Option<usize>> = ages
                    .iter()
                    .map(|a| a.map(|_| strat_rng.random_range(0..2usize)))
                    .collect();
                let out = step_standard_impl(&mut state, &mut streams, &choices, discipline).unwrap();
                for i in 0..3 {
                    if let Some(j) = choices[i] {
                        assert_eq!(
                            out.would_clear(i, j),
                            out.cleared[i],
                            "S^(i,sigma_i) must equal the realized clear"
                        );
                    } else {
                        for j in 0..2 {
                            // empty queues never clear anywhere
                            if ages[i].is_none() {
                                assert!(!out.would_clear(i, j));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn recurrence_holds_every_step() {
        use crate::model::SystemSpec;
        let spec = SystemSpec::new(vec![0.6, 0.4], vec![0.7]).unwrap();
        let mut streams = SimStreams::new(&spec, 9);
        let mut state = StandardState::new(2);
        let mut q_prev = vec![0u64, 0];
        for t in 0..5000u64 {
            let ages = state.decision_ages(&mut streams);
            assert_eq!(state.q_sizes(), q_prev.as_slice(), "Q_t before arrivals");
            let b: Vec<u64> =
                (0..2).map(|i| streams.arrivals[i].has_arrival_at(t) as u64).collect();
            let choices: Vec<Option<usize>> = ages.iter().map(|a| a.map(|_| 0)).collect();
            let out = step_standard(&mut state, &mut streams, &choices).unwrap();
            for i in 0..2 {
                q_prev[i] = q_prev[i] + b[i] - out.cleared[i] as u64;
            }
        }
    }

    #[test]
    fn no_priority_single_queue_matches_standard() {
        use crate::model::SystemSpec;
        let spec = SystemSpec::new(vec![0.5], vec![0.6]).unwrap();
        let mut s1 = SimStreams::new(&spec, 77);
        let mut s2 = SimStreams::new(&spec, 77);
        let mut st1 = StandardState::new(1);
        let mut st2 = StandardState::new(1);
        for _ in 0..5000 {
            let a1 = st1.decision_ages(&mut s1);
            let a2 = st2.decision_ages(&mut s2);
            assert_eq!(a1, a2);
            let c1: Vec<Option<usize>> = a1.iter().map(|a| a.map(|_| 0)).collect();
            let o1 = step_standard(&mut st1, &mut s1, &c1).unwrap();
            let o2 = step_no_priority(&mut st2, &mut s2, &c1).unwrap();
            assert_eq!(o1.cleared, o2.cleared);
            assert_eq!(o1.ages, o2.ages);
            assert_eq!(o1.counterfactual, o2.counterfactual);
        }
    }
}
