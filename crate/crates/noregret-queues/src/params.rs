//! Window sizing for the learning guarantee: given the slack eta, derive the
//! confidence and deviation parameters and the smallest power-of-two window
//! length for which the per-window regret budget and both concentration
//! requirements (geometric arrival gaps, Bernoulli server successes) hold.

use std::fmt;

use thiserror::Error;

use crate::model::SystemSpec;

/// Window search cap: 2^30 steps.
pub const MAX_WINDOW_EXPONENT: u32 = 30;

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("eta = {0} outside (0, 1]")]
    BadEta(f64),
    #[error("no window up to 2^{cap_exponent} satisfies the requirements")]
    NoFiniteWindow { cap_exponent: u32 },
}

/// Shape of the per-window high-probability regret bound phi_delta(w).
#[derive(Clone, Copy)]
pub enum RegretForm {
    /// sqrt(w * ln(m * w / delta)), the usual adversarial-bandit rate.
    SqrtWLog,
    /// Any alternate o(w) bound.
    Custom(fn(w: u64, arms: usize, delta: f64) -> f64),
}

impl RegretForm {
    pub fn eval(&self, w: u64, arms: usize, delta: f64) -> f64 {
        match self {
            RegretForm::SqrtWLog => {
                let wf = w as f64;
                (wf * ((arms as f64) * wf / delta).ln()).sqrt()
            }
            RegretForm::Custom(f) => f(w, arms, delta),
        }
    }
}

impl fmt::Debug for RegretForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegretForm::SqrtWLog => write!(f, "sqrt(w ln(m w / delta))"),
            RegretForm::Custom(_) => write!(f, "custom"),
        }
    }
}

/// Derived window parameters. All inequalities are re-verified by direct
/// substitution before this struct is returned.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowParams {
    pub eta: f64,
    /// delta = eta / 8.
    pub delta: f64,
    /// epsilon = delta * mu_1 / (4 n): uniform relative deviation for the
    /// geometric prefix sums.
    pub epsilon: f64,
    /// epsilon_i = epsilon / lambda_i per queue.
    pub epsilon_i: Vec<f64>,
    /// Smallest power-of-two window passing all three requirements.
    pub w: u64,
    /// n * phi_{eta/(128 n)}(w) + n, the regret budget consumed at w.
    pub regret_budget: f64,
}

impl fmt::Display for WindowParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "eta:            {}", self.eta)?;
        writeln!(f, "delta:          {}", self.delta)?;
        writeln!(f, "epsilon:        {}", self.epsilon)?;
        for (i, e) in self.epsilon_i.iter().enumerate() {
            writeln!(f, "epsilon_{i}:      {e}")?;
        }
        writeln!(f, "window w:       {}", self.w)?;
        writeln!(f, "regret budget:  {:.3}", self.regret_budget)?;
        Ok(())
    }
}

struct Requirements<'a> {
    n: usize,
    m: usize,
    mu1: f64,
    eta: f64,
    delta: f64,
    epsilon: f64,
    form: &'a RegretForm,
}

impl Requirements<'_> {
    /// Regret room: n * phi_{eta/(128 n)}(w) + n <= w * delta * mu_1 / 4.
    fn regret_ok(&self, w: u64) -> bool {
        let nf = self.n as f64;
        let phi = self.form.eval(w, self.m, self.eta / (128.0 * nf));
        nf * phi + nf <= (w as f64) * self.delta * self.mu1 / 4.0
    }

    /// Geometric prefix concentration: 6 n exp(-epsilon^2 w / 36) <= eta/128.
    fn geometric_ok(&self, w: u64) -> bool {
        6.0 * (self.n as f64) * (-self.epsilon * self.epsilon * (w as f64) / 36.0).exp()
            <= self.eta / 128.0
    }

    /// Bernoulli prefix concentration: m exp(-delta^2 w mu_1 / 2) <= eta/128.
    fn bernoulli_ok(&self, w: u64) -> bool {
        (self.m as f64) * (-self.delta * self.delta * (w as f64) * self.mu1 / 2.0).exp()
            <= self.eta / 128.0
    }

    fn all_ok(&self, w: u64) -> bool {
        self.regret_ok(w) && self.geometric_ok(w) && self.bernoulli_ok(w)
    }
}

/// Computes the window parameters with the default regret form.
pub fn compute_window(spec: &SystemSpec, eta: f64) -> Result<WindowParams, ParamsError> {
    compute_window_with(spec, eta, RegretForm::SqrtWLog)
}

/// Computes the window parameters. The search walks powers of two up to
/// 2^30; every candidate is checked by direct substitution, so the returned
/// window provably satisfies all three requirements.
pub fn compute_window_with(
    spec: &SystemSpec,
    eta: f64,
    form: RegretForm,
) -> Result<WindowParams, ParamsError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(ParamsError::BadEta(eta));
    }
    let n = spec.n();
    let m = spec.m();
    let mu1 = spec.mu()[0];
    let delta = eta / 8.0;
    let epsilon = delta * mu1 / (4.0 * n as f64);
    let req = Requirements { n, m, mu1, eta, delta, epsilon, form: &form };

    let mut found = None;
    for exp in 0..=MAX_WINDOW_EXPONENT {
        let w = 1u64 << exp;
        if req.all_ok(w) {
            found = Some(w);
            break;
        }
    }
    let w = found.ok_or(ParamsError::NoFiniteWindow { cap_exponent: MAX_WINDOW_EXPONENT })?;

    // post-hoc: the returned window must satisfy everything it claims
    assert!(req.regret_ok(w), "regret requirement failed post hoc at w={w}");
    assert!(req.geometric_ok(w), "geometric concentration failed post hoc at w={w}");
    assert!(req.bernoulli_ok(w), "bernoulli concentration failed post hoc at w={w}");

    let nf = n as f64;
    Ok(WindowParams {
        eta,
        delta,
        epsilon,
        epsilon_i: spec.lambda().iter().map(|&l| epsilon / l).collect(),
        w,
        regret_budget: nf * form.eval(w, m, eta / (128.0 * nf)) + nf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemSpec;

    fn spec(lambda: &[f64], mu: &[f64]) -> SystemSpec {
        SystemSpec::new(lambda.to_vec(), mu.to_vec()).unwrap()
    }

    #[test]
    fn derived_fields_match_hand_arithmetic() {
        // mu_1 = 1, n = 2, eta = 0.8: delta = 0.1, epsilon = 0.0125
        let s = spec(&[0.5, 0.25], &[1.0, 0.5]);
        let p = compute_window(&s, 0.8).unwrap();
        assert!((p.delta - 0.1).abs() < 1e-15);
        assert!((p.epsilon - 0.0125).abs() < 1e-15);
        assert!((p.epsilon_i[0] - 0.025).abs() < 1e-15);
        assert!((p.epsilon_i[1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn two_queue_benchmark_window() {
        let s = spec(&[0.2, 0.1], &[1.0, 0.8]);
        let p = compute_window(&s, 0.6).unwrap();
        assert!((p.delta - 0.075).abs() < 1e-15);
        assert!((p.epsilon - 0.009375).abs() < 1e-15);
        // smallest power of two past the geometric-concentration threshold
        assert_eq!(p.w, 1 << 22);
        // minimality: half the window must fail at least one requirement
        let req = Requirements {
            n: 2,
            m: 2,
            mu1: 1.0,
            eta: 0.6,
            delta: p.delta,
            epsilon: p.epsilon,
            form: &RegretForm::SqrtWLog,
        };
        assert!(req.all_ok(p.w));
        assert!(!req.all_ok(p.w / 2));
    }

    #[test]
    fn tiny_eta_reports_no_finite_window() {
        let s = spec(&[0.2, 0.1], &[1.0, 0.8]);
        assert_eq!(
            compute_window(&s, 1e-6),
            Err(ParamsError::NoFiniteWindow { cap_exponent: 30 })
        );
    }

    #[test]
    fn zero_top_service_rate_has_no_window() {
        let s = spec(&[0.2], &[0.0]);
        assert!(matches!(compute_window(&s, 0.5), Err(ParamsError::NoFiniteWindow { .. })));
    }

    #[test]
    fn eta_out_of_range_rejected() {
        let s = spec(&[0.2], &[0.9]);
        assert_eq!(compute_window(&s, 0.0), Err(ParamsError::BadEta(0.0)));
        assert_eq!(compute_window(&s, 1.5), Err(ParamsError::BadEta(1.5)));
        assert!(compute_window(&s, f64::NAN).is_err());
    }

    #[test]
    fn window_monotone_in_eta() {
        let s = spec(&[0.2, 0.1], &[1.0, 0.8]);
        let grid = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
        let mut prev = 0u64;
        for &eta in &grid {
            // grid descends, so windows must not shrink
            let w = compute_window(&s, eta).unwrap().w;
            assert!(w >= prev, "w({eta}) = {w} below predecessor {prev}");
            prev = w;
        }
    }
}
