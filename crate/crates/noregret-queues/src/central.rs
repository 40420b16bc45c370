//! Centralized scheduling: majorization utilities, doubly stochastic transfer
//! matrices, Birkhoff-von Neumann decomposition, and the randomized matching
//! scheduler that keeps a feasible system stable.

use rand::Rng;
use thiserror::Error;

use crate::model::{check_feasibility, SystemSpec};

/// Entry tolerance for "nonzero" support during peeling.
const SUPPORT_TOL: f64 = 1e-12;
/// Row/column sum tolerance for validation and reconstruction checks.
const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CentralError {
    #[error("prefix {k} of x does not dominate y")]
    NotDominating { k: usize },
    #[error("matrix is not doubly stochastic: {reason}")]
    NotDoublyStochastic { reason: String },
    #[error("decomposition failed: no perfect matching on residual support at step {step}")]
    DecompositionFailed { step: usize },
    #[error("system is not centrally feasible")]
    Infeasible,
}

/// Square nonnegative matrix whose rows and columns each sum to 1 (within
/// 1e-9), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublyStochastic {
    entries: Vec<f64>,
    size: usize,
}

impl DoublyStochastic {
    pub fn new(entries: Vec<f64>, size: usize) -> Result<Self, CentralError> {
        if entries.len() != size * size || size == 0 {
            return Err(CentralError::NotDoublyStochastic {
                reason: format!("expected {size}x{size} entries"),
            });
        }
        let m = DoublyStochastic { entries, size };
        for i in 0..size {
            let r: f64 = (0..size).map(|j| m.get(i, j)).sum();
            if (r - 1.0).abs() > SUM_TOL {
                return Err(CentralError::NotDoublyStochastic {
                    reason: format!("row {i} sums to {r}"),
                });
            }
            let c: f64 = (0..size).map(|j| m.get(j, i)).sum();
            if (c - 1.0).abs() > SUM_TOL {
                return Err(CentralError::NotDoublyStochastic {
                    reason: format!("column {i} sums to {c}"),
                });
            }
        }
        for (k, &e) in m.entries.iter().enumerate() {
            if e < -SUPPORT_TOL || e.is_nan() {
                return Err(CentralError::NotDoublyStochastic {
                    reason: format!("negative entry at flat index {k}: {e}"),
                });
            }
        }
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.size + col]
    }

    /// Matrix-vector product P*v.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.size);
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }
}

/// Convex combination of permutation matrices: the randomized matching
/// scheduler. `permutations[k][row] = col`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingDistribution {
    permutations: Vec<Vec<usize>>,
    weights: Vec<f64>,
    size: usize,
}

impl MatchingDistribution {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn permutations(&self) -> &[Vec<usize>] {
        &self.permutations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.permutations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutations.is_empty()
    }

    /// Sum of weight * permutation, entrywise.
    pub fn reconstruct(&self) -> Vec<f64> {
        let l = self.size;
        let mut out = vec![0.0; l * l];
        for (perm, &w) in self.permutations.iter().zip(&self.weights) {
            for (row, &col) in perm.iter().enumerate() {
                out[row * l + col] += w;
            }
        }
        out
    }

    /// Expected per-queue service probability when servers succeed with the
    /// given (padded) rates.
    pub fn expected_service(&self, mu_padded: &[f64]) -> Vec<f64> {
        assert_eq!(mu_padded.len(), self.size);
        let mut out = vec![0.0; self.size];
        for (perm, &w) in self.permutations.iter().zip(&self.weights) {
            for (row, &col) in perm.iter().enumerate() {
                out[row] += w * mu_padded[col];
            }
        }
        out
    }

    /// Checks the distribution invariants against a source matrix.
    pub fn validate_against(&self, source: &DoublyStochastic) -> Result<(), CentralError> {
        let l = self.size;
        if l != source.size() {
            return Err(CentralError::NotDoublyStochastic { reason: "size mismatch".into() });
        }
        let wsum: f64 = self.weights.iter().sum();
        if (wsum - 1.0).abs() > SUM_TOL || self.weights.iter().any(|&w| w < 0.0) {
            return Err(CentralError::NotDoublyStochastic {
                reason: format!("weights sum to {wsum}"),
            });
        }
        let rec = self.reconstruct();
        for row in 0..l {
            for col in 0..l {
                let err = (rec[row * l + col] - source.get(row, col)).abs();
                if err > SUM_TOL {
                    return Err(CentralError::NotDoublyStochastic {
                        reason: format!("reconstruction error {err} at ({row},{col})"),
                    });
                }
            }
        }
        let bound = (l - 1) * (l - 1) + 1;
        if self.len() > bound {
            return Err(CentralError::NotDoublyStochastic {
                reason: format!("{} permutations exceeds bound {bound}", self.len()),
            });
        }
        Ok(())
    }
}

/// Shrinks `x` componentwise until it majorizes `y` (weak dominance plus equal
/// totals). Requires every prefix sum of `x` to weakly dominate `y`'s.
///
/// Trims mass from the tail: prefix slacks only shrink where they stay
/// nonnegative, so weak dominance and descending order are preserved. Any
/// output satisfying the majorization predicate is acceptable to callers.
pub fn scale_to_majorization(x: &[f64], y: &[f64]) -> Result<Vec<f64>, CentralError> {
    let len = x.len().max(y.len());
    let mut xp = x.to_vec();
    xp.resize(len, 0.0);
    let mut yp = y.to_vec();
    yp.resize(len, 0.0);

    let mut slack = Vec::with_capacity(len); // prefix(x) - prefix(y)
    let mut acc = 0.0;
    for k in 0..len {
        acc += xp[k] - yp[k];
        if acc < 0.0 {
            return Err(CentralError::NotDominating { k: k + 1 });
        }
        slack.push(acc);
    }

    // total reduction needed
    let mut excess = slack[len - 1];
    for i in (0..len).rev() {
        if excess <= 0.0 {
            break;
        }
        let min_tail_slack = slack[i..].iter().cloned().fold(f64::INFINITY, f64::min);
        let cut = xp[i].min(min_tail_slack).min(excess);
        if cut > 0.0 {
            xp[i] -= cut;
            excess -= cut;
            for s in slack[i..].iter_mut() {
                *s -= cut;
            }
        }
    }
    debug_assert!(excess.abs() < 1e-9, "tail trim left excess {excess}");
    Ok(xp)
}

/// True iff sorted `x` weakly dominates sorted `y` and their totals agree
/// within tolerance.
pub fn majorizes(x: &[f64], y: &[f64]) -> bool {
    let len = x.len().max(y.len());
    let mut sx = 0.0;
    let mut sy = 0.0;
    for k in 0..len {
        sx += x.get(k).copied().unwrap_or(0.0);
        sy += y.get(k).copied().unwrap_or(0.0);
        if sx < sy - SUM_TOL {
            return false;
        }
    }
    (sx - sy).abs() <= SUM_TOL
}

/// Builds a doubly stochastic matrix P with P*x = y, given that sorted `x`
/// majorizes sorted `y`.
///
/// Chain of mass transfers between a surplus and a deficit coordinate, each a
/// convex mix of the identity and one transposition; at most len-1 transfers.
pub fn transfer_matrix(x: &[f64], y: &[f64]) -> Result<DoublyStochastic, CentralError> {
    assert_eq!(x.len(), y.len());
    let l = x.len();
    let mut cur = x.to_vec();
    let mut p = vec![0.0; l * l];
    for i in 0..l {
        p[i * l + i] = 1.0;
    }
    let mut steps = 0usize;
    loop {
        // largest surplus index, then smallest deficit index above it
        let mut surplus = None;
        for i in (0..l).rev() {
            if cur[i] - y[i] > SUM_TOL {
                surplus = Some(i);
                break;
            }
        }
        let Some(i) = surplus else { break };
        let mut deficit = None;
        for j in i + 1..l {
            if y[j] - cur[j] > SUM_TOL {
                deficit = Some(j);
                break;
            }
        }
        let Some(j) = deficit else {
            return Err(CentralError::NotDominating { k: i + 1 });
        };
        let delta = (cur[i] - y[i]).min(y[j] - cur[j]);
        let theta = delta / (cur[i] - cur[j]);
        // rows i and j of P mix with coefficient theta
        for c in 0..l {
            let pi = p[i * l + c];
            let pj = p[j * l + c];
            p[i * l + c] = (1.0 - theta) * pi + theta * pj;
            p[j * l + c] = theta * pi + (1.0 - theta) * pj;
        }
        cur[i] -= delta;
        cur[j] += delta;
        steps += 1;
        assert!(steps <= 4 * l, "transfer chain failed to converge");
    }
    let p = DoublyStochastic::new(p, l)?;
    let check = p.apply(x);
    for k in 0..l {
        assert!(
            (check[k] - y[k]).abs() <= SUM_TOL,
            "transfer matrix drift {} at {k}",
            (check[k] - y[k]).abs()
        );
    }
    Ok(p)
}

/// Greedy Birkhoff-von Neumann peeling: repeatedly find a perfect matching on
/// the positive support, subtract its minimum entry, until the residual is
/// (numerically) zero.
pub fn birkhoff_decompose(p: &DoublyStochastic) -> Result<MatchingDistribution, CentralError> {
    let l = p.size();
    let mut residual: Vec<f64> = (0..l * l).map(|k| p.entries[k]).collect();
    let mut permutations = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let step_cap = l * l - l + 2;
    for step in 0.. {
        let max_entry = residual.iter().cloned().fold(0.0, f64::max);
        if max_entry <= SUPPORT_TOL {
            break;
        }
        if step >= step_cap {
            return Err(CentralError::DecompositionFailed { step });
        }
        let matching = perfect_matching_on_support(&residual, l)
            .ok_or(CentralError::DecompositionFailed { step })?;
        let theta = matching
            .iter()
            .enumerate()
            .map(|(row, &col)| residual[row * l + col])
            .fold(f64::INFINITY, f64::min);
        for (row, &col) in matching.iter().enumerate() {
            residual[row * l + col] -= theta;
        }
        weights.push(theta);
        permutations.push(matching);
    }
    if permutations.is_empty() {
        return Err(CentralError::DecompositionFailed { step: 0 });
    }
    Ok(MatchingDistribution { permutations, weights, size: l })
}

/// Augmenting-path bipartite matching over entries above the support
/// tolerance. Returns `matching[row] = col` when perfect.
fn perfect_matching_on_support(entries: &[f64], l: usize) -> Option<Vec<usize>> {
    let mut col_of_row = vec![usize::MAX; l];
    let mut row_of_col = vec![usize::MAX; l];
    for row in 0..l {
        let mut visited = vec![false; l];
        if !augment(entries, l, row, &mut visited, &mut col_of_row, &mut row_of_col) {
            return None;
        }
    }
    Some(col_of_row)
}

fn augment(
    entries: &[f64],
    l: usize,
    row: usize,
    visited: &mut [bool],
    col_of_row: &mut [usize],
    row_of_col: &mut [usize],
) -> bool {
    for col in 0..l {
        if entries[row * l + col] > SUPPORT_TOL && !visited[col] {
            visited[col] = true;
            if row_of_col[col] == usize::MAX
                || augment(entries, l, row_of_col[col], visited, col_of_row, row_of_col)
            {
                col_of_row[row] = col;
                row_of_col[col] = row;
                return true;
            }
        }
    }
    false
}

/// Builds the randomized matching scheduler for a feasible system: scale the
/// (padded) service rates down until they majorize the arrival rates, express
/// the transfer as a doubly stochastic matrix, and decompose it into matchings.
///
/// The output guarantees expected service strictly above the arrival rate for
/// every queue with positive arrivals.
pub fn build_central_scheduler(spec: &SystemSpec) -> Result<MatchingDistribution, CentralError> {
    if !check_feasibility(spec) {
        return Err(CentralError::Infeasible);
    }
    let lambda = spec.padded_lambda();
    let mu = spec.padded_mu();
    let l = lambda.len();

    // strict prefix slack lets every entry shrink by the same factor, keeping
    // the per-entry reduction strictly positive on the support
    let mut sum_l = 0.0;
    let mut sum_m = 0.0;
    let mut eps = f64::INFINITY;
    for k in 0..l {
        sum_l += lambda[k];
        sum_m += mu[k];
        eps = eps.min(1.0 - sum_l / sum_m);
    }
    let eps = 0.5 * eps;
    debug_assert!(eps > 0.0);
    let shrunk: Vec<f64> = mu.iter().map(|v| v * (1.0 - eps)).collect();

    let majorizing = scale_to_majorization(&shrunk, &lambda)?;
    debug_assert!(majorizes(&majorizing, &lambda));
    let p = transfer_matrix(&majorizing, &lambda)?;
    let dist = birkhoff_decompose(&p)?;
    dist.validate_against(&p)?;

    let service = dist.expected_service(&mu);
    for i in 0..l {
        assert!(
            lambda[i] == 0.0 || service[i] > lambda[i],
            "expected service {} does not exceed arrival {} at queue {i}",
            service[i],
            lambda[i]
        );
    }
    Ok(dist)
}

/// Samples one matching according to the distribution weights. Deterministic
/// given the rng state.
pub fn sample_matching<'a, R: Rng>(dist: &'a MatchingDistribution, rng: &mut R) -> &'a [usize] {
    let u: f64 = rng.random::<f64>();
    let mut acc = 0.0;
    for (perm, &w) in dist.permutations.iter().zip(&dist.weights) {
        acc += w;
        if u < acc {
            return perm;
        }
    }
    dist.permutations.last().expect("non-empty distribution")
}
