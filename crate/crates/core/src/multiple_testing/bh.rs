use num_rational::Ratio;

use crate::error::{config, usage, Result};
use crate::level::Level;
use crate::pvalues::PValue;

/// Outcome of a step-up run.
#[derive(Debug, Clone, PartialEq)]
pub struct BhResult {
    /// `alpha k* / m`, or 0 when nothing is rejected.
    pub threshold: Ratio<u128>,
    /// Rejected indices, ascending.
    pub rejected: Vec<usize>,
    pub k_star: usize,
}

impl BhResult {
    pub fn threshold_f64(&self) -> f64 {
        *self.threshold.numer() as f64 / *self.threshold.denom() as f64
    }

    pub fn is_rejected(&self, i: usize) -> bool {
        self.rejected.binary_search(&i).is_ok()
    }
}

fn check(pvalues: &[PValue], alpha: Level) -> Result<()> {
    if pvalues.is_empty() {
        return usage("step-up rule needs at least one p-value");
    }
    if alpha.is_zero() {
        return config("alpha must be in (0, 1]");
    }
    Ok(())
}

fn result(pvalues: &[PValue], alpha: Level, k_star: usize) -> BhResult {
    let m = pvalues.len();
    if k_star == 0 {
        return BhResult { threshold: Ratio::from_integer(0), rejected: Vec::new(), k_star };
    }
    let rejected: Vec<usize> = (0..m).filter(|&i| pvalues[i].le_step(alpha, k_star, m)).collect();
    debug_assert_eq!(rejected.len(), k_star);
    BhResult {
        threshold: Ratio::new(alpha.numer() as u128 * k_star as u128, alpha.denom() as u128 * m as u128),
        rejected,
        k_star,
    }
}

/// Benjamini-Hochberg: `k* = max{k : p_(k) <= alpha k / m}`, reject `{p_i <= alpha k* / m}`.
pub fn bh(pvalues: &[PValue], alpha: Level) -> Result<BhResult> {
    check(pvalues, alpha)?;
    let m = pvalues.len();
    let mut sorted = pvalues.to_vec();
    sorted.sort_unstable();
    let k_star = (1..=m).rev().find(|&k| sorted[k - 1].le_step(alpha, k, m)).unwrap_or(0);
    Ok(result(pvalues, alpha, k_star))
}

/// Quadratic reference implementation: the largest `k` with at least `k`
/// p-values under `alpha k / m`. No sorting.
pub fn bh_bruteforce(pvalues: &[PValue], alpha: Level) -> Result<BhResult> {
    check(pvalues, alpha)?;
    let m = pvalues.len();
    let mut k_star = 0;
    for k in (1..=m).rev() {
        let below = pvalues.iter().filter(|p| p.le_step(alpha, k, m)).count();
        if below >= k {
            k_star = k;
            break;
        }
    }
    Ok(result(pvalues, alpha, k_star))
}

/// Step-up outcome on p-values `num_i / den` sharing one denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeBh {
    pub k_star: usize,
    /// Reject `i` iff `num_i <= cutoff`; `None` when nothing is rejected.
    pub cutoff: Option<u64>,
}

impl LatticeBh {
    #[inline]
    pub fn rejects(&self, num: u64) -> bool {
        self.cutoff.is_some_and(|c| num <= c)
    }
}

/// [`bh`] specialised to lattice p-values. `scratch` avoids reallocation in
/// simulation loops.
pub fn bh_lattice(nums: &[u64], den: u64, alpha: Level, scratch: &mut Vec<u64>) -> LatticeBh {
    let m = nums.len();
    scratch.clear();
    scratch.extend_from_slice(nums);
    scratch.sort_unstable();
    let (a, b) = (alpha.numer() as u128, alpha.denom() as u128);
    // num/den <= a k/(b m)  <=>  num <= floor(a k den / (b m))
    let cut = |k: usize| (a * k as u128 * den as u128 / (b * m as u128)) as u64;
    for k in (1..=m).rev() {
        let c = cut(k);
        if scratch[k - 1] <= c {
            return LatticeBh { k_star: k, cutoff: Some(c) };
        }
    }
    LatticeBh { k_star: 0, cutoff: None }
}

/// `alpha' = alpha / (1 + (1 - alpha) / (m pi))`, exact.
pub fn mbh_alpha_prime(alpha: Level, m: usize, pi_hat: Level) -> Result<Level> {
    if pi_hat.is_zero() {
        return config("mBH needs an anomaly proportion > 0");
    }
    if alpha.is_zero() {
        return config("alpha must be in (0, 1]");
    }
    if m == 0 {
        return config("window length must be >= 1");
    }
    let (a, b) = (alpha.numer() as u128, alpha.denom() as u128);
    let (c, d) = (pi_hat.numer() as u128, pi_hat.denom() as u128);
    let m = m as u128;
    // a m c / (m c b + (b - a) d)
    Level::from_u128(a * m * c, m * c * b + (b - a) * d)
}

/// Parameters of the modified step-up rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MbhConfig {
    pub alpha: Level,
    pub pi_hat: Level,
    pub m: usize,
    pub ell: u64,
}

impl MbhConfig {
    pub fn alpha_prime(&self) -> Result<Level> {
        mbh_alpha_prime(self.alpha, self.m, self.pi_hat)
    }

    /// Calibration size `ceil(ell m / alpha') - 1`.
    pub fn n_cal(&self) -> Result<u64> {
        Ok(calibration_cardinality(self.m, self.alpha_prime()?, self.ell))
    }
}

/// Modified BH: plain BH at level `alpha'`.
pub fn mbh(pvalues: &[PValue], cfg: &MbhConfig) -> Result<BhResult> {
    if cfg.m != pvalues.len() {
        return usage(format!("mBH configured for m={} but got {} p-values", cfg.m, pvalues.len()));
    }
    bh(pvalues, cfg.alpha_prime()?)
}

/// `ceil(ell m / alpha) - 1`.
pub fn calibration_cardinality(m: usize, alpha: Level, ell: u64) -> u64 {
    let num = ell as u128 * m as u128 * alpha.denom() as u128;
    let den = alpha.numer() as u128;
    (num.div_ceil(den) - 1) as u64
}

/// The multiplier `ell` for which `n = ceil(ell m / alpha) - 1`, if any.
pub fn matches_cardinality(n: u64, m: usize, alpha: Level) -> Option<u64> {
    let mut ell = 1;
    loop {
        let c = calibration_cardinality(m, alpha, ell);
        if c == n {
            return Some(ell);
        }
        if c > n {
            return None;
        }
        ell += 1;
    }
}
