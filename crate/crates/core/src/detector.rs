//! Streaming detector.
//!
//! Each observation is scored, turned into a p-value against the calibration
//! set, and decided by a threshold policy applied either to disjoint blocks of
//! `m` p-values or to the sliding window of the last `m` p-values.

use std::collections::VecDeque;

use crate::error::{config, usage, Error, Result};
use crate::level::Level;
use crate::metrics::ConfusionCounts;
use crate::multiple_testing::{bh, matches_cardinality, LordParams, LordState, ThresholdPolicy};
use crate::pvalues::{CalibrationSet, PValue, PValueKind, Strategy};
use crate::scoring::ScoreFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Windowing {
    /// One threshold per block `[km+1, (k+1)m]`, applied to the whole block.
    Disjoint,
    /// Threshold over the last `m` p-values, applied to the newest one only.
    Overlapping,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub window: usize,
    pub windowing: Windowing,
    pub policy: ThresholdPolicy,
    pub pvalue: PValueKind,
    pub strategy: Strategy,
    /// Calibration size `n`.
    pub n: usize,
    pub score: ScoreFunction,
    /// Accept an `n` that does not satisfy `n = ceil(l m / alpha) - 1`.
    pub force_n: bool,
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return config("window length m must be >= 1");
        }
        self.score.validate()?;
        if self.pvalue.needs_calibration() && self.n == 0 {
            return config("calibration size n must be >= 1");
        }
        if let ThresholdPolicy::Lord3(p) = &self.policy {
            LordState::new(p.clone())?;
        }
        let level = self.policy.effective_alpha(self.window)?;
        if level.is_zero() {
            return config("alpha must be in (0, 1]");
        }
        if self.pvalue == PValueKind::Empirical && !self.force_n && !matches!(self.policy, ThresholdPolicy::Lord3(_)) {
            if matches_cardinality(self.n as u64, self.window, level).is_none() {
                let next = crate::multiple_testing::calibration_cardinality(self.window, level, 1);
                return Err(Error::Config(format!(
                    "calibration size n={} is not of the form ceil(l*m/alpha)-1 for m={} and level {} \
                     (smallest admissible n is {next}); pass force_n to override",
                    self.n, self.window, level
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordStatus {
    /// Calibration or p-value window still filling; decision forced to 0.
    WarmUp,
    Decided,
    /// Trailing partial disjoint block at end of stream; decision forced to 0.
    Undecided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    /// 1-based time index.
    pub t: usize,
    pub pvalue: Option<PValue>,
    /// `None` is the sentinel for records without a threshold.
    pub threshold: Option<f64>,
    pub decision: bool,
    pub label: Option<bool>,
    pub status: RecordStatus,
}

impl DetectionRecord {
    pub fn is_decided(&self) -> bool {
        self.status == RecordStatus::Decided
    }
}

/// Threshold and membership of `window[index]` in the rejected set.
pub fn decide_point(window: &[PValue], policy: &ThresholdPolicy, index: usize) -> Result<(f64, bool)> {
    if index >= window.len() {
        return usage(format!("index {index} outside window of {}", window.len()));
    }
    if matches!(policy, ThresholdPolicy::Lord3(_)) {
        return usage("LORD3 is sequential and has no window rule");
    }
    let level = policy.effective_alpha(window.len())?;
    let r = bh(window, level)?;
    Ok((r.threshold_f64(), r.is_rejected(index)))
}

/// The last `m` p-values, in arrival order and sorted.
struct SortedWindow {
    arrival: VecDeque<PValue>,
    sorted: Vec<PValue>,
}

impl SortedWindow {
    fn new(m: usize) -> Self {
        SortedWindow { arrival: VecDeque::with_capacity(m + 1), sorted: Vec::with_capacity(m + 1) }
    }

    fn push(&mut self, p: PValue, m: usize) {
        let pos = self.sorted.partition_point(|q| *q < p);
        self.sorted.insert(pos, p);
        self.arrival.push_back(p);
        if self.arrival.len() > m {
            let old = self.arrival.pop_front().expect("non-empty");
            let idx = self.sorted.partition_point(|q| *q < old);
            self.sorted.remove(idx);
        }
    }

    fn len(&self) -> usize {
        self.arrival.len()
    }

    /// Step-up threshold over the window and the decision for its newest entry.
    fn decide_newest(&self, level: Level) -> (f64, bool) {
        let m = self.sorted.len();
        let k = (1..=m).rev().find(|&k| self.sorted[k - 1].le_step(level, k, m)).unwrap_or(0);
        if k == 0 {
            return (0.0, false);
        }
        let newest = *self.arrival.back().expect("non-empty");
        let thr = level.numer() as f64 * k as f64 / (level.denom() as f64 * m as f64);
        (thr, newest.le_step(level, k, m))
    }
}

struct Pending {
    t: usize,
    score: f64,
    p: PValue,
    label: Option<bool>,
}

pub struct Detector {
    cfg: DetectorConfig,
    level: Level,
    calib: Option<CalibrationSet>,
    lord: Option<LordState>,
    t: usize,
    recent: SortedWindow,
    block: Vec<Pending>,
}

impl Detector {
    /// Detector whose calibration set fills from the head of the stream.
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        let calib = if cfg.pvalue.needs_calibration() {
            if matches!(cfg.strategy, Strategy::Iid | Strategy::OverlappingShift { .. }) {
                return usage("iid and overlapping-shift calibration need a reference sampler; use with_calibration");
            }
            Some(CalibrationSet::new(cfg.strategy, cfg.n)?)
        } else {
            None
        };
        Self::build(cfg, calib)
    }

    /// Detector with a caller-built (possibly pre-filled) calibration set.
    pub fn with_calibration(cfg: DetectorConfig, calib: CalibrationSet) -> Result<Self> {
        if calib.capacity() != cfg.n || calib.strategy() != cfg.strategy {
            return config("calibration set does not match the detector configuration");
        }
        Self::build(cfg, Some(calib))
    }

    fn build(cfg: DetectorConfig, calib: Option<CalibrationSet>) -> Result<Self> {
        cfg.validate()?;
        let level = cfg.policy.effective_alpha(cfg.window)?;
        let lord = match &cfg.policy {
            ThresholdPolicy::Lord3(p) => Some(LordState::new(p.clone())?),
            _ => None,
        };
        Ok(Detector {
            level,
            calib,
            lord,
            t: 0,
            recent: SortedWindow::new(cfg.window),
            block: Vec::with_capacity(cfg.window),
            cfg,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    /// Feed one observation; completed records are appended to `out`.
    pub fn push(&mut self, x: f64, label: Option<bool>, out: &mut Vec<DetectionRecord>) -> Result<()> {
        self.t += 1;
        let t = self.t;
        let s = self.cfg.score.score(x);

        if let Some(c) = self.calib.as_mut() {
            if !c.is_full() {
                match (c.strategy(), label) {
                    (Strategy::SlidingOracle, None) => return usage("oracle sliding calibration needs labels"),
                    (Strategy::SlidingOracle, Some(true)) => {}
                    _ => c.fill(s)?,
                }
                out.push(DetectionRecord { t, pvalue: None, threshold: None, decision: false, label, status: RecordStatus::WarmUp });
                return Ok(());
            }
        }
        let p = self.cfg.pvalue.pvalue(x, s, self.calib.as_ref())?;

        if let Some(lord) = self.lord.as_mut() {
            let (thr, d) = lord.step(p);
            if let Some(c) = self.calib.as_mut() {
                c.update(s, d, label)?;
            }
            out.push(DetectionRecord { t, pvalue: Some(p), threshold: Some(thr), decision: d, label, status: RecordStatus::Decided });
            return Ok(());
        }

        let m = self.cfg.window;
        match self.cfg.windowing {
            Windowing::Overlapping => {
                self.recent.push(p, m);
                let (thr, d, status) = if self.recent.len() < m {
                    (None, false, RecordStatus::WarmUp)
                } else {
                    let (thr, d) = self.recent.decide_newest(self.level);
                    (Some(thr), d, RecordStatus::Decided)
                };
                if let Some(c) = self.calib.as_mut() {
                    c.update(s, d, label)?;
                }
                out.push(DetectionRecord { t, pvalue: Some(p), threshold: thr, decision: d, label, status });
            }
            Windowing::Disjoint => {
                self.block.push(Pending { t, score: s, p, label });
                if self.block.len() == m {
                    let ps: Vec<PValue> = self.block.iter().map(|b| b.p).collect();
                    let r = bh(&ps, self.level)?;
                    let thr = r.threshold_f64();
                    for (i, b) in std::mem::take(&mut self.block).into_iter().enumerate() {
                        let d = r.is_rejected(i);
                        if let Some(c) = self.calib.as_mut() {
                            c.update(b.score, d, b.label)?;
                        }
                        out.push(DetectionRecord {
                            t: b.t,
                            pvalue: Some(b.p),
                            threshold: Some(thr),
                            decision: d,
                            label: b.label,
                            status: RecordStatus::Decided,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Emit the trailing partial disjoint block, undecided.
    pub fn finish(&mut self, out: &mut Vec<DetectionRecord>) {
        for b in self.block.drain(..) {
            out.push(DetectionRecord {
                t: b.t,
                pvalue: Some(b.p),
                threshold: None,
                decision: false,
                label: b.label,
                status: RecordStatus::Undecided,
            });
        }
    }
}

fn warmup_len(cfg: &DetectorConfig, prefilled: bool) -> usize {
    let cal = if cfg.pvalue.needs_calibration() && !prefilled { cfg.n } else { 0 };
    let win = if matches!(cfg.policy, ThresholdPolicy::Lord3(_)) { 1 } else { cfg.window };
    cal + win
}

fn drive(mut det: Detector, values: &[f64], labels: Option<&[bool]>) -> Result<Vec<DetectionRecord>> {
    if let Some(l) = labels {
        if l.len() != values.len() {
            return usage(format!("{} values but {} labels", values.len(), l.len()));
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (i, &x) in values.iter().enumerate() {
        det.push(x, labels.map(|l| l[i]), &mut out)?;
    }
    det.finish(&mut out);
    Ok(out)
}

/// Run a detector over a whole series, calibrating on its head.
pub fn run_stream(values: &[f64], labels: Option<&[bool]>, cfg: &DetectorConfig) -> Result<Vec<DetectionRecord>> {
    let need = warmup_len(cfg, false);
    if values.len() < need {
        return usage(format!("series of length {} is shorter than warm-up plus one window ({need})", values.len()));
    }
    drive(Detector::new(cfg.clone())?, values, labels)
}

/// Run with a caller-built calibration set.
pub fn run_stream_with(
    values: &[f64],
    labels: Option<&[bool]>,
    cfg: &DetectorConfig,
    calib: CalibrationSet,
) -> Result<Vec<DetectionRecord>> {
    let need = warmup_len(cfg, calib.is_full());
    if values.len() < need {
        return usage(format!("series of length {} is shorter than warm-up plus one window ({need})", values.len()));
    }
    drive(Detector::with_calibration(cfg.clone(), calib)?, values, labels)
}

/// Confusion counts over records. Warm-up and undecided records are skipped
/// unless `include_warmup` is set.
pub fn counts_from_records(records: &[DetectionRecord], include_warmup: bool) -> Result<ConfusionCounts> {
    let mut c = ConfusionCounts::default();
    for r in records {
        if !include_warmup && !r.is_decided() {
            continue;
        }
        let a = r.label.ok_or_else(|| Error::Usage(format!("record t={} has no label", r.t)))?;
        c.record(r.decision, a);
    }
    Ok(c)
}

/// Library defaults for a detector with the given policy.
pub fn default_config(policy: ThresholdPolicy) -> DetectorConfig {
    DetectorConfig {
        window: 100,
        windowing: Windowing::Overlapping,
        policy,
        pvalue: PValueKind::Empirical,
        strategy: Strategy::SlidingEstimated,
        n: 1899,
        score: ScoreFunction::Identity,
        force_n: false,
    }
}

/// `mBH(alpha = 0.1, pi = 0.01)` on overlapping windows of 100 with `n = 1899`.
impl Default for DetectorConfig {
    fn default() -> Self {
        default_config(ThresholdPolicy::Mbh { alpha: Level::new(1, 10).unwrap(), pi_hat: Level::new(1, 100).unwrap() })
    }
}

/// LORD3 parameters with library defaults at `alpha`.
pub fn lord_policy(alpha: Level) -> ThresholdPolicy {
    ThresholdPolicy::Lord3(LordParams::new(alpha))
}
