//! Permutation test on the largest gap between group means.

use rand::seq::SliceRandom;

use crate::error::{usage, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationResult {
    pub statistic: f64,
    pub p_value: f64,
    /// All distinct relabelings were enumerated.
    pub exact: bool,
    pub resamples: u64,
}

fn max_gap(values: &[f64], sizes: &[usize]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut start = 0;
    for &n in sizes {
        let m = values[start..start + n].iter().sum::<f64>() / n as f64;
        lo = lo.min(m);
        hi = hi.max(m);
        start += n;
    }
    hi - lo
}

/// Number of distinct relabelings `N! / prod(n_g!)`, or `None` past `cap`.
fn relabelings(sizes: &[usize], cap: u128) -> Option<u128> {
    let mut total: u128 = 1;
    let mut placed: u128 = 0;
    for &n in sizes {
        for j in 1..=n as u128 {
            placed += 1;
            total = total.checked_mul(placed)? / j;
            if total > cap {
                return None;
            }
        }
    }
    Some(total)
}

/// Next lexicographic permutation in place; false when wrapped.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        v.reverse();
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Two-sided test of equal means across groups, statistic `max_i,j |mean_i - mean_j|`.
///
/// Exhaustive when the number of distinct relabelings is at most
/// `n_permutations`; otherwise `n_permutations` random relabelings with
/// p-value `(1 + #{T* >= T}) / (1 + B)`.
pub fn permutation_test_max_gap(groups: &[Vec<f64>], n_permutations: u64, seed: u64) -> Result<PermutationResult> {
    if groups.len() < 2 {
        return usage("permutation test needs at least two groups");
    }
    if groups.iter().any(|g| g.is_empty()) {
        return usage("permutation test groups must be non-empty");
    }
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let observed = max_gap(&pooled, &sizes);
    let tol = 1e-12 * observed.abs().max(1.0);

    if let Some(total) = relabelings(&sizes, n_permutations as u128) {
        let mut labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(g, &n)| std::iter::repeat_n(g, n)).collect();
        let mut scratch = vec![0.0; pooled.len()];
        let mut hits: u64 = 0;
        let mut seen: u64 = 0;
        loop {
            // group values by label, keeping each group contiguous
            let mut offsets: Vec<usize> = sizes.iter().scan(0, |acc, &n| {
                let o = *acc;
                *acc += n;
                Some(o)
            }).collect();
            for (x, &g) in pooled.iter().zip(&labels) {
                scratch[offsets[g]] = *x;
                offsets[g] += 1;
            }
            seen += 1;
            if max_gap(&scratch, &sizes) >= observed - tol {
                hits += 1;
            }
            if !next_permutation(&mut labels) {
                break;
            }
        }
        debug_assert_eq!(seen as u128, total);
        return Ok(PermutationResult { statistic: observed, p_value: hits as f64 / seen as f64, exact: true, resamples: seen });
    }

    let mut rng = rng::stream(seed, 0);
    let mut shuffled = pooled.clone();
    let mut hits: u64 = 0;
    for _ in 0..n_permutations {
        shuffled.shuffle(&mut rng);
        if max_gap(&shuffled, &sizes) >= observed - tol {
            hits += 1;
        }
    }
    Ok(PermutationResult {
        statistic: observed,
        p_value: (1 + hits) as f64 / (1 + n_permutations) as f64,
        exact: false,
        resamples: n_permutations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_groups_give_one() {
        let g = vec![vec![0.3, 0.3], vec![0.3, 0.3], vec![0.3]];
        let r = permutation_test_max_gap(&g, 10_000, 1).unwrap();
        assert!(r.exact);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn three_versus_three() {
        let g = vec![vec![0.0; 3], vec![1.0; 3]];
        let r = permutation_test_max_gap(&g, 10_000, 1).unwrap();
        assert!(r.exact);
        assert_eq!(r.resamples, 20);
        assert!((r.p_value - 0.1).abs() < 1e-15);
        assert_eq!(r.statistic, 1.0);
    }

    #[test]
    fn falls_back_to_monte_carlo() {
        let g = vec![(0..30).map(|i| i as f64).collect(), (0..30).map(|i| i as f64 + 0.5).collect()];
        let r = permutation_test_max_gap(&g, 2000, 9).unwrap();
        assert!(!r.exact);
        assert!(r.p_value > 0.5);
        let shifted = vec![(0..30).map(|i| i as f64).collect(), (0..30).map(|i| i as f64 + 40.0).collect()];
        let r = permutation_test_max_gap(&shifted, 2000, 9).unwrap();
        assert!((r.p_value - 1.0 / 2001.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(permutation_test_max_gap(&[vec![1.0]], 10, 1).is_err());
        assert!(permutation_test_max_gap(&[vec![1.0], vec![]], 10, 1).is_err());
    }

    #[test]
    fn relabeling_counts() {
        assert_eq!(relabelings(&[3, 3], 1000), Some(20));
        assert_eq!(relabelings(&[2, 2, 2], 1000), Some(90));
        assert_eq!(relabelings(&[50, 50], 1_000_000), None);
    }
}
