//! Calibration-overlap experiments.
//!
//! Compares the FDR of BH on empirical p-values when the test points share
//! one calibration set, use partially overlapping ones, or independent ones,
//! and probes the positive-dependence structure that sharing induces.

use rayon::prelude::*;

use crate::error::Result;
use crate::generator::Reference;
use crate::level::Level;
use crate::metrics::{fdp, MeanSe};
use crate::multiple_testing::bh_lattice;
use crate::permutation::{permutation_test_max_gap, PermutationResult};
use crate::rng::{self, derive_seed};
use crate::sim::{draw_counts, replicate_windows, CalScheme, Engine, Scratch, WindowDesign};

/// Calibration sizes of the overlap table.
pub const GRID_N: [usize; 8] = [249, 250, 499, 500, 749, 750, 999, 1000];

/// Bonferroni level for eight simultaneous column tests at 5%.
pub const BONFERRONI_THRESHOLD: f64 = 0.05 / 8.0;

/// Same, overlaps of 0.1% to 50%, then independent sets.
pub fn grid_strategies() -> Vec<CalScheme> {
    let mut v = vec![CalScheme::Same];
    for (num, den) in [(1, 1000), (2, 1000), (5, 1000), (1, 100), (2, 100), (5, 100), (1, 10), (2, 10), (1, 2)] {
        v.push(CalScheme::Overlap(Level::new(num, den).expect("valid shift")));
    }
    v.push(CalScheme::Iid);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapScenario {
    pub m: usize,
    pub m1: usize,
    pub shift: f64,
    pub alpha: Level,
    pub replications: usize,
    pub engine: Engine,
}

impl Default for OverlapScenario {
    fn default() -> Self {
        OverlapScenario {
            m: 100,
            m1: 1,
            shift: 4.0,
            alpha: Level::new(1, 10).unwrap(),
            replications: 1000,
            engine: Engine::Direct,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OverlapTable {
    pub strategies: Vec<CalScheme>,
    pub n_values: Vec<usize>,
    /// `fdr[s][j]` for strategy `s` and calibration size `n_values[j]`.
    pub fdr: Vec<Vec<MeanSe>>,
    pub fdp_samples: Vec<Vec<Vec<f64>>>,
    /// One test per calibration size, across strategies.
    pub permutation: Vec<PermutationResult>,
}

pub fn run_overlap_grid(
    strategies: &[CalScheme],
    n_values: &[usize],
    scenario: &OverlapScenario,
    seed: u64,
    n_permutations: u64,
) -> Result<OverlapTable> {
    let mut fdr = Vec::new();
    let mut samples = Vec::new();
    for (si, &scheme) in strategies.iter().enumerate() {
        let mut row = Vec::new();
        let mut srow = Vec::new();
        for (ni, &n) in n_values.iter().enumerate() {
            let d = WindowDesign {
                m: scenario.m,
                m1: scenario.m1,
                shift: scenario.shift,
                reference: Reference::GaussianStd,
                n,
                scheme,
                engine: scenario.engine,
            };
            let cell = derive_seed(seed, (si * 1000 + ni) as u64);
            let out = replicate_windows(&d, scenario.alpha, scenario.replications, cell)?;
            let f: Vec<f64> = out.iter().map(|o| fdp(&o.empirical)).collect();
            row.push(MeanSe::of(&f));
            srow.push(f);
        }
        fdr.push(row);
        samples.push(srow);
    }
    let mut permutation = Vec::new();
    for j in 0..n_values.len() {
        let groups: Vec<Vec<f64>> = samples.iter().map(|s| s[j].clone()).collect();
        permutation.push(permutation_test_max_gap(&groups, n_permutations, derive_seed(seed, 1_000_000 + j as u64))?);
    }
    Ok(OverlapTable { strategies: strategies.to_vec(), n_values: n_values.to_vec(), fdr, fdp_samples: samples, permutation })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub frequency: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrdsReport {
    pub buckets: Vec<Bucket>,
    /// Each bucket is at least the previous one minus 3 standard errors.
    pub monotone: bool,
    /// Every bucket lies within 3 standard errors of the pooled frequency.
    pub flat: bool,
}

/// Frequency of "BH on the other `m - 1` p-values rejects nothing" (an
/// increasing set) given the bucket of the first p-value. All points are null.
pub fn prds_sanity_check(scheme: CalScheme, n: usize, m: usize, alpha: Level, buckets: usize, reps: usize, seed: u64) -> Result<PrdsReport> {
    let d = WindowDesign { m, m1: 0, shift: 0.0, reference: Reference::GaussianStd, n, scheme, engine: Engine::Direct };
    let sampler = d.reference.sampler()?;
    let obs: Vec<(usize, bool)> = (0..reps)
        .into_par_iter()
        .map_init(
            || (Scratch::default(), Vec::new()),
            |(s, buf), b| {
                let mut r = rng::stream(seed, b as u64);
                draw_counts(&d, &sampler, &mut r, s);
                let u = s.counts[0] as f64 / n as f64;
                let bucket = ((u * buckets as f64) as usize).min(buckets - 1);
                let none = bh_lattice(&s.counts[1..], n as u64, alpha, buf).k_star == 0;
                (bucket, none)
            },
        )
        .collect();
    let mut hits = vec![0usize; buckets];
    let mut totals = vec![0usize; buckets];
    for (b, none) in &obs {
        totals[*b] += 1;
        hits[*b] += usize::from(*none);
    }
    let pooled = hits.iter().sum::<usize>() as f64 / reps as f64;
    let out: Vec<Bucket> = (0..buckets)
        .map(|j| {
            let c = totals[j];
            let f = if c == 0 { 0.0 } else { hits[j] as f64 / c as f64 };
            let se = if c == 0 { f64::INFINITY } else { (f * (1.0 - f) / c as f64).sqrt().max(1.0 / c as f64) };
            Bucket { lo: j as f64 / buckets as f64, hi: (j + 1) as f64 / buckets as f64, count: c, frequency: f, se }
        })
        .collect();
    let monotone = out.windows(2).all(|w| w[1].frequency >= w[0].frequency - 3.0 * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt());
    let flat = out.iter().all(|b| (b.frequency - pooled).abs() <= 3.0 * b.se);
    Ok(PrdsReport { buckets: out, monotone, flat })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_list() {
        let s = grid_strategies();
        assert_eq!(s.len(), 11);
        assert_eq!(s[0], CalScheme::Same);
        assert_eq!(s[10], CalScheme::Iid);
    }

    #[test]
    fn same_calibration_shows_an_increasing_trend() {
        let r = prds_sanity_check(CalScheme::Same, 250, 100, Level::new(1, 10).unwrap(), 5, 10_000, 4).unwrap();
        assert!(r.monotone, "{r:?}");
        assert!(r.buckets[4].frequency > r.buckets[0].frequency);
        let r = prds_sanity_check(CalScheme::Iid, 250, 100, Level::new(1, 10).unwrap(), 5, 10_000, 4).unwrap();
        assert!(r.flat, "{r:?}");
    }
}
