//! Error-rate estimators. Every ratio here uses the `0/0 = 0` convention.

use crate::error::{usage, Result};

/// `num / den`, with `0/0 = 0`.
#[inline]
pub fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub rejections: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub anomalies: u64,
    pub nulls: u64,
}

impl ConfusionCounts {
    #[inline]
    pub fn record(&mut self, decision: bool, anomaly: bool) {
        if anomaly {
            self.anomalies += 1;
            self.false_negatives += u64::from(!decision);
        } else {
            self.nulls += 1;
            self.false_positives += u64::from(decision);
        }
        self.rejections += u64::from(decision);
    }

    pub fn from_decisions(decisions: &[bool], labels: &[bool]) -> Result<Self> {
        if decisions.len() != labels.len() {
            return usage(format!("{} decisions but {} labels", decisions.len(), labels.len()));
        }
        let mut c = ConfusionCounts::default();
        for (&d, &a) in decisions.iter().zip(labels) {
            c.record(d, a);
        }
        Ok(c)
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.rejections += other.rejections;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
        self.anomalies += other.anomalies;
        self.nulls += other.nulls;
    }

    pub fn scaled(&self, c: u64) -> ConfusionCounts {
        ConfusionCounts {
            rejections: self.rejections * c,
            false_positives: self.false_positives * c,
            false_negatives: self.false_negatives * c,
            anomalies: self.anomalies * c,
            nulls: self.nulls * c,
        }
    }
}

/// False discovery proportion `FP / R`.
pub fn fdp(c: &ConfusionCounts) -> f64 {
    ratio(c.false_positives, c.rejections)
}

/// False negative proportion `FN / m1`.
pub fn fnp(c: &ConfusionCounts) -> f64 {
    ratio(c.false_negatives, c.anomalies)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfdrEstimate {
    pub value: f64,
    /// No rejection in any window: the value is the `0/0` convention.
    pub degenerate: bool,
}

/// Ratio of summed false positives to summed rejections across windows.
pub fn mfdr_estimate(windows: &[ConfusionCounts]) -> Result<MfdrEstimate> {
    if windows.is_empty() {
        return usage("mFDR estimate needs at least one window");
    }
    let fp: u64 = windows.iter().map(|w| w.false_positives).sum();
    let r: u64 = windows.iter().map(|w| w.rejections).sum();
    Ok(MfdrEstimate { value: ratio(fp, r), degenerate: r == 0 })
}

/// Mean of per-window FDP.
pub fn mean_fdp(windows: &[ConfusionCounts]) -> f64 {
    mean(windows.iter().map(fdp))
}

/// Mean of per-window FNP.
pub fn mean_fnp(windows: &[ConfusionCounts]) -> f64 {
    mean(windows.iter().map(fnp))
}

fn mean(it: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = it.len();
    if n == 0 {
        0.0
    } else {
        it.sum::<f64>() / n as f64
    }
}

/// Sample mean with its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> MeanSe {
        let n = xs.len();
        if n == 0 {
            return MeanSe::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        MeanSe { mean, se, n }
    }
}

/// Streaming mean/variance (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, o: &Accumulator) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * self.n as f64 * o.n as f64 / n as f64;
        self.n = n;
    }

    pub fn summary(&self) -> MeanSe {
        let se = if self.n > 1 { (self.m2 / (self.n as f64 - 1.0) / self.n as f64).sqrt() } else { 0.0 };
        MeanSe { mean: self.mean, se, n: self.n as usize }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(fp: u64, r: u64) -> ConfusionCounts {
        ConfusionCounts { rejections: r, false_positives: fp, ..Default::default() }
    }

    #[test]
    fn fdp_examples() {
        assert_eq!(fdp(&c(0, 0)), 0.0);
        assert_eq!(fdp(&c(1, 2)), 0.5);
    }

    #[test]
    fn four_subseries_example() {
        // 6 rejections and 2 false positives spread over four windows.
        let w = [c(1, 2), c(0, 1), c(1, 2), c(0, 1)];
        let mut total = ConfusionCounts::default();
        w.iter().for_each(|x| total.merge(x));
        assert!((fdp(&total) - 1.0 / 3.0).abs() < 1e-15);
        assert!((mfdr_estimate(&w).unwrap().value - 1.0 / 3.0).abs() < 1e-15);
        let w = [c(1, 2), c(1, 2), c(0, 1), c(0, 1)];
        assert_eq!(mean_fdp(&w), 0.25);
    }

    #[test]
    fn fnp_examples() {
        let mut k = ConfusionCounts::default();
        assert_eq!(fnp(&k), 0.0);
        k.anomalies = 5;
        k.false_negatives = 5;
        assert_eq!(fnp(&k), 1.0);
        k.false_negatives = 1;
        assert_eq!(fnp(&k), 0.2);
    }

    #[test]
    fn mfdr_differs_from_mean_fdp() {
        let w = [c(1, 2), c(1, 1)];
        assert!((mfdr_estimate(&w).unwrap().value - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(mean_fdp(&w), 0.75);
        let z = mfdr_estimate(&[c(0, 0), c(0, 0)]).unwrap();
        assert_eq!(z, MfdrEstimate { value: 0.0, degenerate: true });
        assert_eq!(mfdr_estimate(&[c(1, 3)]).unwrap().value, fdp(&c(1, 3)));
        assert!(mfdr_estimate(&[]).is_err());
    }

    #[test]
    fn record_and_lengths() {
        let k = ConfusionCounts::from_decisions(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!(k, ConfusionCounts { rejections: 2, false_positives: 1, false_negatives: 1, anomalies: 2, nulls: 2 });
        assert!(ConfusionCounts::from_decisions(&[true], &[]).is_err());
    }

    #[test]
    fn accumulator_matches_batch() {
        let xs: Vec<f64> = (0..57).map(|i| ((i * 37) % 11) as f64 / 3.0).collect();
        let mut a = Accumulator::default();
        let mut b = Accumulator::default();
        for (i, x) in xs.iter().enumerate() {
            if i < 20 { a.push(*x) } else { b.push(*x) }
        }
        a.merge(&b);
        let s = a.summary();
        let t = MeanSe::of(&xs);
        assert!((s.mean - t.mean).abs() < 1e-12 && (s.se - t.se).abs() < 1e-12);
    }
}
