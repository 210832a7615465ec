//! Empirical and conformal p-values over a calibration set.
//!
//! An empirical p-value is `#{z >= s} / n`, a conformal one is
//! `(1 + #{z >= s}) / (n + 1)`. Both are stored as exact fractions.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;

use crate::error::{config, usage, Error, Result};
use crate::generator::Reference;
use crate::level::Level;

/// A p-value, either an exact fraction or a real number.
#[derive(Debug, Clone, Copy)]
pub enum PValue {
    Exact { num: u64, den: u64 },
    Real(f64),
}

impl PValue {
    pub fn exact(num: u64, den: u64) -> Self {
        debug_assert!(den > 0 && num <= den);
        PValue::Exact { num, den }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            PValue::Exact { num, den } => num as f64 / den as f64,
            PValue::Real(p) => p,
        }
    }

    /// `self <= num / den`, exact whenever `self` is exact.
    #[inline]
    pub fn le_ratio(&self, num: u128, den: u128) -> bool {
        match *self {
            PValue::Exact { num: c, den: n } => match ((c as u128).checked_mul(den), num.checked_mul(n as u128)) {
                (Some(l), Some(r)) => l <= r,
                _ => (c as f64 / n as f64) <= (num as f64 / den as f64),
            },
            PValue::Real(p) => p <= num as f64 / den as f64,
        }
    }

    /// `self <= alpha * k / m`.
    #[inline]
    pub fn le_step(&self, alpha: Level, k: usize, m: usize) -> bool {
        self.le_ratio(alpha.numer() as u128 * k as u128, alpha.denom() as u128 * m as u128)
    }

    fn cmp_value(&self, other: &PValue) -> Ordering {
        match (*self, *other) {
            (PValue::Exact { num: a, den: b }, PValue::Exact { num: c, den: d }) => {
                (a as u128 * d as u128).cmp(&(c as u128 * b as u128))
            }
            _ => self.as_f64().total_cmp(&other.as_f64()),
        }
    }
}

impl PartialEq for PValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_value(other) == Ordering::Equal
    }
}

impl Eq for PValue {}

impl PartialOrd for PValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_value(other)
    }
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PValue::Exact { num, den } => write!(f, "{num}/{den}"),
            PValue::Real(p) => write!(f, "{p}"),
        }
    }
}

/// How calibration contents evolve as the stream advances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Filled once, then frozen.
    Fixed,
    /// Entire buffer redrawn from the reference law after every point.
    Iid,
    /// Appends points the detector declared normal (FIFO).
    SlidingEstimated,
    /// Appends points whose true label is normal (FIFO).
    SlidingOracle,
    /// Slides over a reference stream, `floor(i s n)` fresh points by step `i`.
    OverlappingShift { s: Level },
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::Fixed => "fixed".into(),
            Strategy::Iid => "iid".into(),
            Strategy::SlidingEstimated => "sliding".into(),
            Strategy::SlidingOracle => "sliding-oracle".into(),
            Strategy::OverlappingShift { s } => format!("overlap-{s}"),
        }
    }

    fn needs_reference(&self) -> bool {
        matches!(self, Strategy::Iid | Strategy::OverlappingShift { .. })
    }
}

/// Source of fresh reference scores for the simulation-only strategies.
pub type Refill = Box<dyn FnMut() -> f64 + Send>;

/// Calibration buffer, kept both in arrival order and sorted.
pub struct CalibrationSet {
    strategy: Strategy,
    capacity: usize,
    arrival: VecDeque<f64>,
    sorted: Vec<f64>,
    refill: Option<Refill>,
    steps: u64,
}

impl fmt::Debug for CalibrationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CalibrationSet")
            .field("strategy", &self.strategy)
            .field("capacity", &self.capacity)
            .field("len", &self.arrival.len())
            .finish()
    }
}

impl CalibrationSet {
    pub fn new(strategy: Strategy, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return config("calibration capacity must be >= 1");
        }
        if let Strategy::OverlappingShift { s } = strategy {
            if s.is_zero() {
                return config("overlap shift must be in (0, 1]");
            }
        }
        Ok(CalibrationSet {
            strategy,
            capacity,
            arrival: VecDeque::with_capacity(capacity + 1),
            sorted: Vec::with_capacity(capacity + 1),
            refill: None,
            steps: 0,
        })
    }

    /// Pre-filled set. At most `capacity` scores are kept (the most recent).
    pub fn with_scores(strategy: Strategy, capacity: usize, scores: &[f64]) -> Result<Self> {
        let mut c = Self::new(strategy, capacity)?;
        for &z in scores {
            c.push(z);
        }
        Ok(c)
    }

    /// Reference draws for [`Strategy::Iid`] and [`Strategy::OverlappingShift`].
    /// An empty set is filled immediately.
    pub fn with_refill(mut self, mut refill: Refill) -> Self {
        while self.arrival.len() < self.capacity {
            let z = refill();
            self.push(z);
        }
        self.refill = Some(refill);
        self
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.arrival.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrival.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.arrival.len() == self.capacity
    }

    /// Scores in arrival order.
    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.arrival.iter().copied()
    }

    /// Number of stored scores `>= s`.
    #[inline]
    pub fn count_ge(&self, s: f64) -> usize {
        self.sorted.len() - self.sorted.partition_point(|&z| z < s)
    }

    /// Append, evicting the oldest score when over capacity.
    fn push(&mut self, z: f64) {
        let pos = self.sorted.partition_point(|&v| v < z);
        self.sorted.insert(pos, z);
        self.arrival.push_back(z);
        if self.arrival.len() > self.capacity {
            let old = self.arrival.pop_front().expect("non-empty");
            let idx = self.sorted.partition_point(|&v| v < old);
            debug_assert!(self.sorted[idx] == old || old.is_nan());
            self.sorted.remove(idx);
        }
    }

    /// Warm-up fill: accepted until the buffer first reaches capacity.
    pub fn fill(&mut self, z: f64) -> Result<()> {
        if self.is_full() {
            return Err(Error::State("calibration set already full".into()));
        }
        self.push(z);
        Ok(())
    }

    fn check_full(&self) -> Result<()> {
        if self.arrival.is_empty() {
            return Err(Error::State("empty calibration set".into()));
        }
        if !self.is_full() {
            return Err(Error::State(format!(
                "calibration set holds {} of {} scores",
                self.arrival.len(),
                self.capacity
            )));
        }
        Ok(())
    }

    /// Apply the strategy after a decision on the point with score `z`.
    pub fn update(&mut self, z: f64, decision: bool, label: Option<bool>) -> Result<()> {
        match self.strategy {
            Strategy::Fixed => {}
            Strategy::SlidingEstimated => {
                if !decision {
                    self.push(z);
                }
            }
            Strategy::SlidingOracle => match label {
                Some(false) => self.push(z),
                Some(true) => {}
                None => return usage("oracle sliding calibration needs true labels"),
            },
            Strategy::Iid => {
                let cap = self.capacity;
                let refill = self.refill_mut()?;
                let fresh: Vec<f64> = (0..cap).map(|_| refill()).collect();
                self.arrival.clear();
                self.sorted.clear();
                for z in fresh {
                    self.push(z);
                }
            }
            Strategy::OverlappingShift { s } => {
                let n = self.capacity as u64;
                let before = s.floor_mul(self.steps * n);
                self.steps += 1;
                let after = s.floor_mul(self.steps * n);
                let shift = ((after - before) as usize).min(self.capacity);
                let refill = self.refill_mut()?;
                let fresh: Vec<f64> = (0..shift).map(|_| refill()).collect();
                for z in fresh {
                    self.push(z);
                }
            }
        }
        Ok(())
    }

    fn refill_mut(&mut self) -> Result<&mut Refill> {
        debug_assert!(self.strategy.needs_reference());
        self.refill
            .as_mut()
            .ok_or_else(|| Error::Usage(format!("{} calibration needs a reference sampler", self.strategy.label())))
    }
}

/// `#{z >= s} / n`.
pub fn empirical_pvalue(s: f64, calib: &CalibrationSet) -> Result<PValue> {
    calib.check_full()?;
    Ok(PValue::exact(calib.count_ge(s) as u64, calib.len() as u64))
}

/// `(1 + #{z >= s}) / (n + 1)`.
pub fn conformal_pvalue(s: f64, calib: &CalibrationSet) -> Result<PValue> {
    calib.check_full()?;
    Ok(PValue::exact(calib.count_ge(s) as u64 + 1, calib.len() as u64 + 1))
}

/// Which estimator turns an observation into a p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PValueKind {
    Empirical,
    Conformal,
    /// True p-value `P(X > x)` under a known reference law (identity score).
    Oracle(Reference),
    /// The observations already are p-values.
    Precomputed,
}

impl PValueKind {
    pub fn needs_calibration(&self) -> bool {
        !matches!(self, PValueKind::Oracle(_) | PValueKind::Precomputed)
    }

    /// `x` is the raw observation, `s` its score.
    pub fn pvalue(&self, x: f64, s: f64, calib: Option<&CalibrationSet>) -> Result<PValue> {
        match self {
            PValueKind::Oracle(r) => Ok(PValue::Real(r.survival(x))),
            PValueKind::Precomputed => {
                if (0.0..=1.0).contains(&x) {
                    Ok(PValue::Real(x))
                } else {
                    usage(format!("{x} is not a p-value"))
                }
            }
            kind => {
                let calib = calib.ok_or_else(|| Error::State("p-value estimator needs a calibration set".into()))?;
                if *kind == PValueKind::Empirical {
                    empirical_pvalue(s, calib)
                } else {
                    conformal_pvalue(s, calib)
                }
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PValueKind::Empirical => "empirical",
            PValueKind::Conformal => "conformal",
            PValueKind::Oracle(_) => "oracle",
            PValueKind::Precomputed => "precomputed",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(scores: &[f64]) -> CalibrationSet {
        CalibrationSet::with_scores(Strategy::Fixed, scores.len(), scores).unwrap()
    }

    #[test]
    fn empirical_examples() {
        let c = set(&[1.0, 2.0, 3.0]);
        assert_eq!(empirical_pvalue(2.5, &c).unwrap(), PValue::exact(1, 3));
        assert_eq!(empirical_pvalue(10.0, &c).unwrap(), PValue::exact(0, 3));
        assert_eq!(empirical_pvalue(1.0, &c).unwrap(), PValue::exact(3, 3));
    }

    #[test]
    fn conformal_examples() {
        let c = set(&[1.0, 2.0, 3.0]);
        assert_eq!(conformal_pvalue(2.5, &c).unwrap(), PValue::exact(1, 2));
        assert_eq!(conformal_pvalue(10.0, &c).unwrap(), PValue::exact(1, 4));
        assert_eq!(conformal_pvalue(0.0, &c).unwrap(), PValue::exact(1, 1));
    }

    #[test]
    fn ties_count_toward_the_pvalue() {
        let c = set(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(empirical_pvalue(2.0, &c).unwrap(), PValue::exact(3, 4));
    }

    #[test]
    fn empty_or_partial_set_is_a_state_error() {
        let c = CalibrationSet::new(Strategy::SlidingEstimated, 3).unwrap();
        assert!(matches!(empirical_pvalue(0.0, &c), Err(Error::State(_))));
        let c = CalibrationSet::with_scores(Strategy::SlidingEstimated, 3, &[1.0]).unwrap();
        assert!(matches!(conformal_pvalue(0.0, &c), Err(Error::State(_))));
    }

    #[test]
    fn fixed_never_changes() {
        let mut c = set(&[1.0, 2.0]);
        c.update(5.0, false, Some(false)).unwrap();
        assert_eq!(c.scores().collect::<Vec<_>>(), vec![1.0, 2.0]);
    }

    #[test]
    fn sliding_estimated_fifo() {
        let mut c = CalibrationSet::with_scores(Strategy::SlidingEstimated, 3, &[1.0, 2.0, 3.0]).unwrap();
        c.update(9.0, true, None).unwrap();
        assert_eq!(c.scores().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
        c.update(0.5, false, None).unwrap();
        assert_eq!(c.scores().collect::<Vec<_>>(), vec![2.0, 3.0, 0.5]);
        assert_eq!(c.count_ge(1.0), 2);
    }

    #[test]
    fn sliding_oracle_needs_labels() {
        let mut c = CalibrationSet::with_scores(Strategy::SlidingOracle, 2, &[1.0, 2.0]).unwrap();
        assert!(matches!(c.update(0.0, false, None), Err(Error::Usage(_))));
        c.update(7.0, true, Some(true)).unwrap();
        assert_eq!(c.scores().collect::<Vec<_>>(), vec![1.0, 2.0]);
        c.update(7.0, true, Some(false)).unwrap();
        assert_eq!(c.scores().collect::<Vec<_>>(), vec![2.0, 7.0]);
    }

    #[test]
    fn overlap_shift_advances_by_floor_steps() {
        // s = 1/4, n = 6: shifts floor(1.5)=1, floor(3)-1=2, floor(4.5)-3=1, ...
        let mut next = 0.0;
        let refill: Refill = Box::new(move || {
            next += 1.0;
            next
        });
        let s = Level::new(1, 4).unwrap();
        let mut c = CalibrationSet::new(Strategy::OverlappingShift { s }, 6).unwrap().with_refill(refill);
        assert_eq!(c.scores().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        c.update(0.0, false, None).unwrap();
        assert_eq!(c.scores().next(), Some(2.0));
        c.update(0.0, false, None).unwrap();
        assert_eq!(c.scores().next(), Some(4.0));
        c.update(0.0, false, None).unwrap();
        assert_eq!(c.scores().next(), Some(5.0));
        assert_eq!(c.len(), 6);
    }

    #[test]
    fn iid_redraws_everything() {
        let mut next = 0.0;
        let refill: Refill = Box::new(move || {
            next += 1.0;
            next
        });
        let mut c = CalibrationSet::new(Strategy::Iid, 3).unwrap().with_refill(refill);
        c.update(0.0, false, None).unwrap();
        assert_eq!(c.scores().collect::<Vec<_>>(), vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn simulation_strategies_need_a_sampler() {
        let mut c = CalibrationSet::with_scores(Strategy::Iid, 1, &[0.0]).unwrap();
        assert!(c.update(0.0, false, None).is_err());
    }

    #[test]
    fn ordering_mixes_exact_and_real() {
        assert!(PValue::exact(1, 3) < PValue::Real(0.34));
        assert_eq!(PValue::exact(1, 2), PValue::exact(2, 4));
        assert!(PValue::exact(1, 10).le_step(Level::new(1, 10).unwrap(), 1, 1));
        assert!(!PValue::exact(101, 1000).le_step(Level::new(1, 10).unwrap(), 1, 1));
    }
}
