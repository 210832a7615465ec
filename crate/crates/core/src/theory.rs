//! Closed-form quantities for the step-up rule on empirical p-values.

use num_rational::Ratio;
use rand::Rng as _;

use crate::error::{config, Error, Result};
use crate::level::Level;
use crate::multiple_testing::bh;
use crate::pvalues::PValue;
use crate::rng::{self, Rng};

/// Law of `R(i)`, the number of rejections once `p_i` is replaced by 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionDistribution {
    /// `pmf[k - 1] = P(R(i) = k)`.
    pmf: Vec<f64>,
}

impl RejectionDistribution {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return config("rejection distribution needs m >= 1");
        }
        if pmf.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return config("probabilities must lie in [0, 1]");
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return config(format!("probabilities sum to {total}"));
        }
        Ok(RejectionDistribution { pmf })
    }

    /// Empirical law of observed rejection counts, each in `1..=m`.
    pub fn from_samples(samples: &[usize], m: usize) -> Result<Self> {
        if samples.is_empty() {
            return config("no rejection counts");
        }
        let mut counts = vec![0u64; m];
        for &k in samples {
            if k == 0 || k > m {
                return config(format!("rejection count {k} outside 1..={m}"));
            }
            counts[k - 1] += 1;
        }
        let n = samples.len() as f64;
        let mut pmf: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        // absorb rounding so the invariant holds exactly
        let total: f64 = pmf.iter().sum();
        let top = pmf.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|x| x.0).unwrap_or(0);
        pmf[top] += 1.0 - total;
        Self::new(pmf)
    }

    pub fn point_mass(k: usize, m: usize) -> Result<Self> {
        if k == 0 || k > m {
            return config(format!("point mass {k} outside 1..={m}"));
        }
        let mut pmf = vec![0.0; m];
        pmf[k - 1] = 1.0;
        Self::new(pmf)
    }

    pub fn m(&self) -> usize {
        self.pmf.len()
    }

    pub fn prob(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.pmf.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }
}

/// Exact FDR of BH on empirical p-values with independent calibration sets:
/// `m0 * sum_k (floor(alpha k n / m) + 1) / (n + 1) / k * P(R(i) = k)`.
pub fn theoretical_fdr_empirical_bh(n: u64, m: usize, m0: usize, alpha: Level, rdist: &RejectionDistribution) -> f64 {
    let (a, b) = (alpha.numer() as u128, alpha.denom() as u128);
    let mut total = 0.0;
    for k in 1..=rdist.m().min(m) {
        let p = rdist.prob(k);
        if p == 0.0 {
            continue;
        }
        let fl = a * k as u128 * n as u128 / (b * m as u128);
        total += (fl + 1) as f64 / (n as f64 + 1.0) / k as f64 * p;
    }
    m0 as f64 * total
}

/// Fractional part of `alpha k n / m`, exact.
pub fn q_fractional(n: u64, k: u64, m: u64, alpha: Level) -> Ratio<u128> {
    let num = alpha.numer() as u128 * k as u128 * n as u128;
    let den = alpha.denom() as u128 * m as u128;
    Ratio::new(num % den, den)
}

/// `E[R] = m pi (1 - beta) / (1 - alpha)`.
pub fn expected_rejections(m: usize, pi: f64, alpha: f64, beta: f64) -> Result<f64> {
    if alpha >= 1.0 {
        return Err(Error::Domain("expected rejections needs alpha < 1".into()));
    }
    Ok(m as f64 * pi * (1.0 - beta) / (1.0 - alpha))
}

/// `(alpha m0 / m) E[R(1)] / E[R]`, the mFDR of BH in terms of rejection means.
pub fn mfdr_from_rejections(alpha: f64, m0: usize, m: usize, mean_r_i: f64, mean_r: f64) -> f64 {
    if mean_r == 0.0 {
        0.0
    } else {
        alpha * m0 as f64 / m as f64 * mean_r_i / mean_r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicReport {
    pub mean_r: f64,
    pub mean_r_i: f64,
    /// `E[R(i)] - (E[R] + 1)`.
    pub gap: f64,
    /// `E[R(i)] - E[R]`; the heuristic predicts 1.
    pub increment: f64,
    /// Every replication rejected the full window; the comparison is void.
    pub saturated: bool,
    /// Per-replication `(R, R(i))`.
    pub samples: Vec<(usize, usize)>,
}

/// Monte-Carlo estimate of `E[R]` and `E[R(i)]` for BH at `alpha`.
///
/// `generator` returns a window of p-values with anomaly labels. `R(i)` zeroes
/// one null index chosen uniformly; replications without nulls are skipped.
pub fn heuristic_gap<G>(replications: usize, alpha: Level, seed: u64, mut generator: G) -> Result<HeuristicReport>
where
    G: FnMut(&mut Rng) -> (Vec<PValue>, Vec<bool>),
{
    let mut samples = Vec::with_capacity(replications);
    let mut saturated = true;
    for b in 0..replications {
        let mut rng = rng::stream(seed, b as u64);
        let (mut p, labels) = generator(&mut rng);
        let m = p.len();
        let r = bh(&p, alpha)?.k_star;
        let nulls: Vec<usize> = (0..m).filter(|&i| !labels[i]).collect();
        if nulls.is_empty() {
            continue;
        }
        let i = nulls[rng.random_range(0..nulls.len())];
        p[i] = PValue::exact(0, 1);
        let r_i = bh(&p, alpha)?.k_star;
        saturated &= r == m;
        samples.push((r, r_i));
    }
    if samples.is_empty() {
        return config("no replication contained a null");
    }
    let n = samples.len() as f64;
    let mean_r = samples.iter().map(|s| s.0 as f64).sum::<f64>() / n;
    let mean_r_i = samples.iter().map(|s| s.1 as f64).sum::<f64>() / n;
    Ok(HeuristicReport {
        mean_r,
        mean_r_i,
        gap: mean_r_i - (mean_r + 1.0),
        increment: mean_r_i - mean_r,
        saturated,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiple_testing::calibration_cardinality;

    fn lvl(s: &str) -> Level {
        s.parse().unwrap()
    }

    #[test]
    fn formula_examples() {
        let one = RejectionDistribution::point_mass(1, 100).unwrap();
        let f = theoretical_fdr_empirical_bh(999, 100, 99, lvl("0.1"), &one);
        assert!((f - 0.099).abs() < 1e-15);
        let f = theoretical_fdr_empirical_bh(1000, 100, 99, lvl("0.1"), &one);
        assert!((f - 99.0 * 2.0 / 1001.0).abs() < 1e-15);
        assert!((f - 0.19780).abs() < 1e-5);
    }

    #[test]
    fn fractional_part_examples() {
        assert_eq!(q_fractional(999, 1, 100, lvl("0.1")), Ratio::new(999, 1000));
        for k in 1..=100u64 {
            assert_eq!(q_fractional(1000, k, 100, lvl("0.1")), Ratio::from_integer(0));
            // n = m/alpha - 1 gives 1 - alpha k / m, taken mod 1
            let expect = Ratio::new(1000u128 - k as u128, 1000u128) - Ratio::from_integer((1000 - k as u128) / 1000);
            assert_eq!(q_fractional(999, k, 100, lvl("0.1")), expect);
        }
    }

    #[test]
    fn decomposition_through_fractional_parts() {
        // FDR = (m0 alpha / m) n/(n+1) + m0/(n+1) sum (1 - q)/k P(k)
        let pmf: Vec<f64> = (1..=50).map(|k| if k <= 5 { 0.2 } else { 0.0 }).collect();
        let r = RejectionDistribution::new(pmf).unwrap();
        let (m, m0, a) = (50usize, 47usize, lvl("0.2"));
        for n in [9u64, 10, 249, 250, 333, 1000] {
            let direct = theoretical_fdr_empirical_bh(n, m, m0, a, &r);
            let mut tail = 0.0;
            for k in 1..=m {
                let q = q_fractional(n, k as u64, m as u64, a);
                let q = *q.numer() as f64 / *q.denom() as f64;
                tail += (1.0 - q) / k as f64 * r.prob(k);
            }
            let via_q = m0 as f64 * a.as_f64() / m as f64 * n as f64 / (n as f64 + 1.0) + m0 as f64 / (n as f64 + 1.0) * tail;
            assert!((direct - via_q).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn cardinality_bounds_hold() {
        for m in [50usize, 100, 150] {
            for a in ["0.05", "0.1", "0.2"] {
                let alpha = lvl(a);
                for ell in 1..=20 {
                    let n = calibration_cardinality(m, alpha, ell);
                    let m0 = m - 1;
                    let upper = m0 as f64 * alpha.as_f64() / m as f64;
                    let lower = n as f64 / (n as f64 + 1.0) * upper;
                    for k in [1usize, 2, m / 2, m] {
                        let r = RejectionDistribution::point_mass(k, m).unwrap();
                        let f = theoretical_fdr_empirical_bh(n, m, m0, alpha, &r);
                        assert!(f >= lower - 1e-12 && f <= upper + 1e-12, "m={m} a={a} ell={ell} k={k}: {f}");
                    }
                }
            }
        }
    }

    #[test]
    fn expected_rejection_examples() {
        assert_eq!(expected_rejections(100, 0.01, 0.1, 1.0).unwrap(), 0.0);
        assert!((expected_rejections(100, 0.01, 0.1, 0.0).unwrap() - 1.0 / 0.9).abs() < 1e-12);
        assert!(matches!(expected_rejections(100, 0.01, 1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn distribution_validation() {
        assert!(RejectionDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(RejectionDistribution::from_samples(&[0, 1], 3).is_err());
        let d = RejectionDistribution::from_samples(&[1, 2, 2, 3], 3).unwrap();
        assert!((d.prob(2) - 0.5).abs() < 1e-15);
        assert!((d.mean() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn saturated_heuristic() {
        let rep = heuristic_gap(20, lvl("0.1"), 1, |_| (vec![PValue::exact(0, 1); 10], vec![false; 10])).unwrap();
        assert!(rep.saturated);
        assert_eq!(rep.mean_r, 10.0);
        assert_eq!(rep.mean_r_i, 10.0);
        assert_eq!(rep.increment, 0.0);
    }
}
