//! Monte-Carlo kernels for single windows of `m` test points.
//!
//! A window holds `m1` anomalies at the Dirac location `shift` and `m - m1`
//! reference draws. Each test point gets a calibration count
//! `c_i = #{Z >= x_i}` from its calibration set, which yields both the
//! empirical (`c/n`) and conformal (`(c+1)/(n+1)`) p-values.
//!
//! Two engines produce the counts. `Direct` draws reference values and counts.
//! `Transformed` works on survival values `S(x)`, which are uniform under the
//! reference law; it needs no reference sampler and, for independent
//! calibration sets, draws each count as `Binomial(n, S(x_i))`. The two are
//! equal in distribution for continuous reference laws.

use rand::Rng as _;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::Result;
use crate::generator::{Reference, Sampler};
use crate::level::Level;
use crate::metrics::ConfusionCounts;
use crate::multiple_testing::{bh, bh_lattice};
use crate::pvalues::PValue;
use crate::rng::{self, Rng};

/// How the `m` test points share calibration data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CalScheme {
    /// One calibration set for the whole window.
    Same,
    /// An independent calibration set per test point.
    Iid,
    /// Test point `i` (1-based) uses `Z[floor(i s n) + 1 ..= floor(i s n) + n]`.
    Overlap(Level),
}

impl CalScheme {
    pub fn label(&self) -> String {
        match self {
            CalScheme::Same => "same".into(),
            CalScheme::Iid => "iid".into(),
            CalScheme::Overlap(s) => format!("overlap-{}", s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Direct,
    Transformed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowDesign {
    pub m: usize,
    pub m1: usize,
    pub shift: f64,
    pub reference: Reference,
    pub n: usize,
    pub scheme: CalScheme,
    pub engine: Engine,
}

/// Reusable buffers for one worker.
#[derive(Debug, Default)]
pub struct Scratch {
    xs: Vec<f64>,
    order: Vec<usize>,
    sorted: Vec<f64>,
    bucket: Vec<u64>,
    pool: Vec<f64>,
    sort_buf: Vec<u64>,
    cells: Vec<u32>,
    pub counts: Vec<u64>,
}

/// Bucket index over sorted points: `count_le(z) = #{x <= z}` via a uniform
/// grid on `[x_min, x_max]` and a short local scan.
struct Grid {
    lo: f64,
    hi: f64,
    scale: f64,
    last: usize,
}

impl Grid {
    fn new(sorted: &[f64], cells: &mut Vec<u32>) -> Grid {
        let k = 4 * sorted.len().max(1);
        let lo = sorted.first().copied().unwrap_or(0.0);
        let hi = sorted.last().copied().unwrap_or(0.0);
        let width = (hi - lo) / k as f64;
        cells.clear();
        if !(width > 0.0 && width.is_finite()) {
            return Grid { lo, hi, scale: 0.0, last: 0 };
        }
        let mut j = 0;
        for c in 0..k {
            let edge = lo + c as f64 * width;
            while j < sorted.len() && sorted[j] <= edge {
                j += 1;
            }
            cells.push(j as u32);
        }
        Grid { lo, hi, scale: 1.0 / width, last: k - 1 }
    }

    #[inline]
    fn count_le(&self, sorted: &[f64], cells: &[u32], z: f64) -> usize {
        if z < self.lo {
            return 0;
        }
        if z >= self.hi {
            return sorted.len();
        }
        if cells.is_empty() {
            return sorted.partition_point(|&x| x <= z);
        }
        let c = (((z - self.lo) * self.scale) as usize).min(self.last);
        let mut pos = cells[c] as usize;
        while pos > 0 && sorted[pos - 1] > z {
            pos -= 1;
        }
        while pos < sorted.len() && sorted[pos] <= z {
            pos += 1;
        }
        pos
    }
}

/// Calibration counts of one window. Anomalies occupy the first `m1` slots.
pub fn draw_counts(d: &WindowDesign, sampler: &Sampler, rng: &mut Rng, s: &mut Scratch) {
    let m = d.m;
    s.counts.clear();
    s.counts.resize(m, 0);
    s.xs.clear();
    match d.engine {
        // survival values: anomalies sit at S(shift), nulls are uniform,
        // and c_i = #{V <= u_i} with V uniform
        Engine::Transformed => {
            let u_anom = d.reference.survival(d.shift);
            for i in 0..m {
                s.xs.push(if i < d.m1 { u_anom } else { rng.random::<f64>() });
            }
        }
        Engine::Direct => {
            for i in 0..m {
                s.xs.push(if i < d.m1 { d.shift } else { sampler.sample(rng) });
            }
        }
    }
    let transformed = d.engine == Engine::Transformed;
    let draw_ref = |rng: &mut Rng| -> f64 {
        if transformed {
            rng.random::<f64>()
        } else {
            sampler.sample(rng)
        }
    };
    // z "reaches" x when it counts toward x's p-value
    let reaches = |z: f64, x: f64| if transformed { z <= x } else { z >= x };

    match d.scheme {
        CalScheme::Iid => {
            for i in 0..m {
                let x = s.xs[i];
                s.counts[i] = if transformed {
                    Binomial::new(d.n as u64, x.clamp(0.0, 1.0)).expect("valid binomial").sample(rng)
                } else {
                    (0..d.n).filter(|_| reaches(draw_ref(rng), x)).count() as u64
                };
            }
        }
        CalScheme::Same => {
            s.order.clear();
            s.order.extend(0..m);
            let xs = &s.xs;
            s.order.sort_unstable_by(|&a, &b| xs[a].total_cmp(&xs[b]));
            s.sorted.clear();
            s.sorted.extend(s.order.iter().map(|&i| xs[i]));
            s.bucket.clear();
            s.bucket.resize(m + 1, 0);
            if transformed {
                for _ in 0..d.n {
                    let z = draw_ref(rng);
                    s.bucket[s.sorted.partition_point(|&u| u < z)] += 1;
                }
            } else {
                let grid = Grid::new(&s.sorted, &mut s.cells);
                let (sorted, cells, bucket) = (&s.sorted[..], &s.cells[..], &mut s.bucket[..]);
                match sampler {
                    Sampler::Gaussian => {
                        for _ in 0..d.n {
                            let z: f64 = rng.sample(StandardNormal);
                            bucket[grid.count_le(sorted, cells, z)] += 1;
                        }
                    }
                    _ => {
                        for _ in 0..d.n {
                            bucket[grid.count_le(sorted, cells, sampler.sample(rng))] += 1;
                        }
                    }
                }
            }
            if transformed {
                // V <= u_(j) iff pos < j (1-based j)
                let mut acc = 0;
                for j in 0..m {
                    acc += s.bucket[j];
                    s.counts[s.order[j]] = acc;
                }
            } else {
                // Z >= x_(j) iff pos >= j (1-based j)
                let mut acc = 0;
                for j in (0..m).rev() {
                    acc += s.bucket[j + 1];
                    s.counts[s.order[j]] = acc;
                }
            }
        }
        CalScheme::Overlap(shift) => {
            let n = d.n;
            let len = shift.floor_mul((m * n) as u64) as usize + n;
            s.pool.clear();
            for _ in 0..len {
                let z = draw_ref(rng);
                s.pool.push(z);
            }
            for i in 0..m {
                let start = shift.floor_mul(((i + 1) * n) as u64) as usize;
                let x = s.xs[i];
                s.counts[i] = s.pool[start..start + n].iter().filter(|&&z| reaches(z, x)).count() as u64;
            }
        }
    }
}

/// Outcome of one window under both estimators.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WindowOutcome {
    pub empirical: ConfusionCounts,
    pub conformal: ConfusionCounts,
    /// Rejections of BH on empirical p-values after zeroing one null.
    pub r_i: usize,
}

fn confusion(nums: &[u64], m1: usize, cut: impl Fn(u64) -> bool) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (i, &k) in nums.iter().enumerate() {
        c.record(cut(k), i < m1);
    }
    c
}

/// Step-up at `alpha` on the window's empirical and conformal p-values.
pub fn window_outcome(d: &WindowDesign, alpha: Level, sampler: &Sampler, rng: &mut Rng, s: &mut Scratch) -> WindowOutcome {
    draw_counts(d, sampler, rng, s);
    let n = d.n as u64;
    let emp = bh_lattice(&s.counts, n, alpha, &mut s.sort_buf);
    let empirical = confusion(&s.counts, d.m1, |k| emp.rejects(k));
    let conf_nums: Vec<u64> = s.counts.iter().map(|c| c + 1).collect();
    let conf = bh_lattice(&conf_nums, n + 1, alpha, &mut s.sort_buf);
    let conformal = confusion(&conf_nums, d.m1, |k| conf.rejects(k));
    let mut r_i = 0;
    if d.m1 < d.m {
        let i = rng.random_range(d.m1..d.m);
        let saved = s.counts[i];
        s.counts[i] = 0;
        r_i = bh_lattice(&s.counts, n, alpha, &mut s.sort_buf).k_star;
        s.counts[i] = saved;
    }
    WindowOutcome { empirical, conformal, r_i }
}

/// Step-up at `alpha` on true p-values: `S(shift)` for anomalies, uniform for nulls.
pub fn oracle_window(m: usize, m1: usize, anomaly_p: f64, alpha: Level, rng: &mut Rng) -> Result<ConfusionCounts> {
    let p: Vec<PValue> = (0..m).map(|i| PValue::Real(if i < m1 { anomaly_p } else { rng.random() })).collect();
    let r = bh(&p, alpha)?;
    let mut c = ConfusionCounts::default();
    for i in 0..m {
        c.record(r.is_rejected(i), i < m1);
    }
    Ok(c)
}

/// Run `reps` replications of `d` in parallel. Replication `b` uses stream
/// `(seed, b)`; output order is replication order.
pub fn replicate_windows(d: &WindowDesign, alpha: Level, reps: usize, seed: u64) -> Result<Vec<WindowOutcome>> {
    let sampler = d.reference.sampler()?;
    Ok((0..reps)
        .into_par_iter()
        .map_init(Scratch::default, |s, b| {
            let mut r = rng::stream(seed, b as u64);
            window_outcome(d, alpha, &sampler, &mut r, s)
        })
        .collect())
}
