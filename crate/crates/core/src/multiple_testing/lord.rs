//! LORD3 alpha-investing.
//!
//! Threshold at step `t`: `gamma_{t - tau} * W(tau)`, with `tau` the last
//! rejection time (0 before any) and `W(tau)` the wealth just after it.
//! Wealth starts at `w0`, pays the threshold each step and earns `b0` on a
//! rejection.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::level::Level;
use crate::pvalues::PValue;

/// Terms used to normalise the default weight sequence.
pub const GAMMA_HORIZON: u64 = 10_000_000;

fn gamma_raw(j: u64) -> f64 {
    let jf = j as f64;
    (jf.max(2.0)).ln() / (jf * jf.ln().sqrt().exp())
}

fn default_norm() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| (1..=GAMMA_HORIZON).map(gamma_raw).sum())
}

/// Nonincreasing weights `gamma_1, gamma_2, ...` summing to at most 1.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaSequence {
    /// `log(max(j,2)) / (j exp(sqrt(log j)))`, normalised over [`GAMMA_HORIZON`] terms.
    Default,
    /// Explicit finite prefix; zero afterwards.
    Custom(Arc<Vec<f64>>),
}

impl GammaSequence {
    pub fn get(&self, j: u64) -> f64 {
        debug_assert!(j >= 1);
        match self {
            GammaSequence::Default if j <= GAMMA_HORIZON => gamma_raw(j) / default_norm(),
            GammaSequence::Default => 0.0,
            GammaSequence::Custom(v) => v.get(j as usize - 1).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LordParams {
    pub alpha: Level,
    pub w0: f64,
    pub b0: f64,
    pub gamma: GammaSequence,
}

impl LordParams {
    /// `w0 = alpha / 2`, `b0 = alpha - w0`, default weights.
    pub fn new(alpha: Level) -> Self {
        let a = alpha.as_f64();
        LordParams { alpha, w0: a / 2.0, b0: a - a / 2.0, gamma: GammaSequence::Default }
    }
}

#[derive(Debug, Clone)]
pub struct LordState {
    params: LordParams,
    t: u64,
    wealth: f64,
    tau: u64,
    wealth_at_tau: f64,
    rejections: Vec<u64>,
    pending: Option<f64>,
}

impl LordState {
    pub fn new(params: LordParams) -> Result<Self> {
        if let GammaSequence::Custom(v) = &params.gamma {
            if v.is_empty() || v.iter().any(|g| !(*g >= 0.0)) {
                return Err(Error::State("LORD weight sequence is empty or invalid".into()));
            }
        }
        if !(params.w0 > 0.0) || params.b0 < 0.0 {
            return Err(Error::Config("LORD needs w0 > 0 and b0 >= 0".into()));
        }
        Ok(LordState {
            wealth: params.w0,
            wealth_at_tau: params.w0,
            params,
            t: 0,
            tau: 0,
            rejections: Vec::new(),
            pending: None,
        })
    }

    /// Completed steps.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn wealth(&self) -> f64 {
        self.wealth
    }

    pub fn rejection_times(&self) -> &[u64] {
        &self.rejections
    }

    /// Threshold for the upcoming step `t + 1`, capped by the current wealth.
    pub fn threshold(&self) -> f64 {
        let j = self.t + 1 - self.tau;
        (self.params.gamma.get(j) * self.wealth_at_tau).min(self.wealth)
    }

    /// Record the decision taken at the upcoming step.
    pub fn observe(&mut self, decision: bool) {
        let spent = self.pending.take().unwrap_or_else(|| self.threshold());
        self.t += 1;
        self.wealth = (self.wealth - spent).max(0.0);
        if decision {
            self.wealth += self.params.b0;
            self.tau = self.t;
            self.wealth_at_tau = self.wealth;
            self.rejections.push(self.t);
        }
    }

    /// Test `p` at the upcoming step. Returns `(threshold, decision)`.
    pub fn step(&mut self, p: PValue) -> (f64, bool) {
        let thr = self.threshold();
        let decision = p.as_f64() <= thr;
        self.pending = Some(thr);
        self.observe(decision);
        (thr, decision)
    }
}

/// Apply the last decision and return the next threshold.
pub fn lord3_next(state: &mut LordState, last_pvalue: PValue, last_decision: bool) -> f64 {
    let _ = last_pvalue;
    state.observe(last_decision);
    state.threshold()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> LordParams {
        LordParams::new("0.1".parse().unwrap())
    }

    #[test]
    fn default_gamma_is_positive_nonincreasing() {
        let g = GammaSequence::Default;
        let mut prev = g.get(1);
        assert!(prev > 0.0);
        for j in 2..5000 {
            let x = g.get(j);
            assert!(x > 0.0 && x <= prev, "j={j}");
            prev = x;
        }
    }

    #[test]
    fn no_rejections_gives_w0_gamma() {
        let mut s = LordState::new(params()).unwrap();
        let g = GammaSequence::Default;
        let mut prev = f64::INFINITY;
        for t in 1..=500u64 {
            let (thr, d) = s.step(PValue::Real(1.0));
            assert!(!d);
            assert!((thr - 0.05 * g.get(t)).abs() < 1e-15);
            assert!(thr < prev && thr > 0.0);
            prev = thr;
        }
    }

    #[test]
    fn wealth_stays_nonnegative_and_rejection_resets_clock() {
        let mut s = LordState::new(params()).unwrap();
        for t in 0..3000 {
            let p = if t % 37 == 0 { PValue::Real(0.0) } else { PValue::Real(0.5) };
            let (thr, _) = s.step(p);
            assert!(thr > 0.0 && thr < 1.0);
            assert!(s.wealth() >= 0.0);
        }
        assert!(!s.rejection_times().is_empty());
        // right after a rejection the next threshold uses gamma_1
        let mut s = LordState::new(params()).unwrap();
        s.step(PValue::Real(1.0));
        s.step(PValue::Real(0.0));
        let expected = GammaSequence::Default.get(1) * s.wealth();
        assert!((s.threshold() - expected).abs() < 1e-15);
    }

    #[test]
    fn lord3_next_matches_step() {
        let mut a = LordState::new(params()).unwrap();
        let mut b = LordState::new(params()).unwrap();
        let (_, d) = a.step(PValue::Real(0.001));
        let next = lord3_next(&mut b, PValue::Real(0.001), d);
        assert_eq!(next, a.threshold());
    }

    #[test]
    fn invalid_custom_gamma() {
        let mut p = params();
        p.gamma = GammaSequence::Custom(Arc::new(vec![]));
        assert!(matches!(LordState::new(p), Err(Error::State(_))));
    }
}
