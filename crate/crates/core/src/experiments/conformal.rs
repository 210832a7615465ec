//! Empirical against conformal p-values, and FDR drops at intermediate `n`.

use super::fdr_vs_n::{n_values, shift_for};
use super::sweep::{at, run_sweep, SweepCase};
use super::{fmt_f, parse_engine, parse_reference, parse_scheme, sorted_unique, Check, Ctx, ExperimentName, ExperimentOutput, LinePlot, Params};
use crate::error::{config, Result};
use crate::generator::Reference;
use crate::io::Table;
use crate::level::Level;
use crate::rng::derive_seed;
use crate::sim::{CalScheme, Engine};

pub(crate) struct ConfParams {
    pub m: usize,
    pub m1: usize,
    pub delta: f64,
    pub alpha: Level,
    pub reference: Reference,
    pub n_values: Vec<usize>,
    pub scheme: CalScheme,
    pub engine: Engine,
    pub reps: usize,
}

impl ConfParams {
    pub fn read(p: &mut Params, ctx: Ctx) -> Result<Self> {
        Self::read_inner(p, ctx, true)
    }

    fn read_inner(p: &mut Params, ctx: Ctx, with_m1: bool) -> Result<Self> {
        let m = p.usize("m", 100)?;
        let m1 = if with_m1 { p.usize("m1", 1)? } else { 0 };
        if m == 0 || m1 > m {
            return config("need m >= 1 and m1 <= m");
        }
        Ok(ConfParams {
            m,
            m1,
            delta: p.f64("delta", 4.0)?,
            alpha: p.level("alpha", "0.1")?,
            reference: parse_reference(&p.string("reference", "gaussian"))?,
            n_values: n_values(p)?,
            scheme: parse_scheme(&p.string("calibration", "same"))?,
            engine: parse_engine(&p.string("engine", "direct"))?,
            reps: ctx.reps(p, 10_000)?,
        })
    }
}

pub(crate) fn run(p: &mut Params, ctx: Ctx) -> Result<ExperimentOutput> {
    let cp = ConfParams::read(p, ctx)?;
    p.finish()?;
    let case = SweepCase {
        label: format!("{}:delta={}", cp.reference.label(), cp.delta),
        reference: cp.reference,
        shift: shift_for(cp.reference, cp.delta),
        m: cp.m,
        m1: cp.m1,
    };
    // both estimators are computed from the same draws
    let pts = run_sweep(&case, &cp.n_values, cp.alpha, cp.scheme, cp.engine, cp.reps, ctx.seed)?;
    let mut out = ExperimentOutput::new(
        ExperimentName::ConformalCompare,
        Table::new([
            "n",
            "fdr_empirical",
            "fdr_empirical_se",
            "fdr_conformal",
            "fdr_conformal_se",
            "fnr_empirical",
            "fnr_empirical_se",
            "fnr_conformal",
            "fnr_conformal_se",
            "replications",
        ]),
    );
    let mut plot = LinePlot::new("Empirical against conformal p-values", "n", "FDR");
    for q in &pts {
        out.results.push(vec![
            q.n.to_string(),
            fmt_f(q.fdr.mean),
            fmt_f(q.fdr.se),
            fmt_f(q.fdr_conformal.mean),
            fmt_f(q.fdr_conformal.se),
            fmt_f(q.fnr.mean),
            fmt_f(q.fnr.se),
            fmt_f(q.fnr_conformal.mean),
            fmt_f(q.fnr_conformal.se),
            cp.reps.to_string(),
        ]);
    }
    plot.add("empirical", pts.iter().map(|q| (q.n as f64, q.fdr.mean)).collect());
    plot.add("conformal", pts.iter().map(|q| (q.n as f64, q.fdr_conformal.mean)).collect());
    let bound = (cp.m - cp.m1) as f64 * cp.alpha.as_f64() / cp.m as f64;
    plot.hlines.push(bound);
    out.plot = Some(plot);

    let worse: Vec<usize> = pts.iter().filter(|q| q.fnr_conformal.mean < q.fnr.mean).map(|q| q.n).collect();
    out.checks.push(Check::new(
        "FNR(conformal) >= FNR(empirical) at every n",
        worse.is_empty(),
        if worse.is_empty() { format!("{} grid points", pts.len()) } else { format!("violated at n={worse:?}") },
    ));
    for n in [999, 1000, 1999, 2000] {
        if let Some(q) = at(&pts, n) {
            out.summarize(&case.label, &format!("fdr_empirical@n={n}"), q.fdr);
            out.summarize(&case.label, &format!("fdr_conformal@n={n}"), q.fdr_conformal);
            out.summarize(&case.label, &format!("fnr_empirical@n={n}"), q.fnr);
            out.summarize(&case.label, &format!("fnr_conformal@n={n}"), q.fnr_conformal);
        }
    }
    for n in [1000, 2000] {
        if let Some(q) = at(&pts, n) {
            let lim = bound + 3.0 * ctx.widen() * q.fdr_conformal.se;
            out.checks.push(Check::new(
                format!("conformal FDR(n={n}) <= m0 alpha / m + 3 SE"),
                q.fdr_conformal.mean <= lim,
                format!("FDR={:.4}, limit {lim:.4}", q.fdr_conformal.mean),
            ));
        }
    }
    Ok(out)
}

pub(crate) struct DropsParams {
    pub base: ConfParams,
    pub m1s: Vec<usize>,
    pub law_n: Vec<usize>,
}

impl DropsParams {
    pub fn read(p: &mut Params, ctx: Ctx) -> Result<Self> {
        let base = ConfParams::read_inner(p, ctx, false)?;
        let m1s = sorted_unique(p.list("m1s", "1,2,3,4")?);
        if m1s.iter().any(|&k| k >= base.m) {
            return config("every m1 must be < m");
        }
        let law_n = sorted_unique(p.list("law_n_values", "999,1000")?);
        Ok(DropsParams { base, m1s, law_n })
    }
}

/// `n = l m / (alpha k) - 1` within `[1, n_max]`, where that is an integer.
pub fn drop_points(m: usize, alpha: Level, k: usize, n_max: usize) -> Vec<usize> {
    let num = m as u128 * alpha.denom() as u128;
    let den = alpha.numer() as u128 * k as u128;
    (1..)
        .map(|l: u128| (l, l * num))
        .take_while(|&(_, v)| v / den <= n_max as u128 + 1)
        .filter(|&(_, v)| v % den == 0 && v / den >= 2)
        .map(|(_, v)| (v / den - 1) as usize)
        .collect()
}

pub(crate) fn run_drops(p: &mut Params, ctx: Ctx) -> Result<ExperimentOutput> {
    let dp = DropsParams::read(p, ctx)?;
    p.finish()?;
    let cp = &dp.base;
    let mut out = ExperimentOutput::new(
        ExperimentName::IntermediateDrops,
        Table::new(["m1", "n", "fdr", "fdr_se", "formula", "mode_r_i", "replications"]),
    );
    let mut laws = Table::new(["m1", "n", "k", "probability"]);
    let mut drops = Table::new(["m1", "k", "n_drop", "fdr_at_drop", "fdr_after"]);
    let mut plot = LinePlot::new("FDR against n for several anomaly counts", "n", "FDR");
    let n_max = cp.n_values.iter().copied().max().unwrap_or(0);
    for (i, &m1) in dp.m1s.iter().enumerate() {
        let case = SweepCase {
            label: format!("m1={m1}"),
            reference: cp.reference,
            shift: shift_for(cp.reference, cp.delta),
            m: cp.m,
            m1,
        };
        let mut grid = cp.n_values.clone();
        grid.extend(&dp.law_n);
        let grid = sorted_unique(grid);
        let pts = run_sweep(&case, &grid, cp.alpha, cp.scheme, cp.engine, cp.reps, derive_seed(ctx.seed, i as u64))?;
        let mut modes = Vec::new();
        for q in &pts {
            let mode = (0..=cp.m).max_by(|&a, &b| q.r_i.prob(a).total_cmp(&q.r_i.prob(b)).then(b.cmp(&a))).unwrap_or(0);
            modes.push(mode);
            if cp.n_values.contains(&q.n) {
                out.results.push(vec![
                    m1.to_string(),
                    q.n.to_string(),
                    fmt_f(q.fdr.mean),
                    fmt_f(q.fdr.se),
                    fmt_f(q.formula),
                    mode.to_string(),
                    cp.reps.to_string(),
                ]);
            }
            if dp.law_n.contains(&q.n) {
                for k in 0..=cp.m {
                    let pr = q.r_i.prob(k);
                    if pr > 0.0 {
                        laws.push(vec![m1.to_string(), q.n.to_string(), k.to_string(), fmt_f(pr)]);
                    }
                }
                out.summarize(&case.label, &format!("mean_r_i@n={}", q.n), crate::metrics::MeanSe { mean: q.r_i.mean(), se: f64::NAN, n: cp.reps });
            }
        }
        // drops predicted by the most frequent value of R(i)
        let mut counts = std::collections::BTreeMap::new();
        for m in &modes {
            *counts.entry(*m).or_insert(0usize) += 1;
        }
        if let Some((&k, _)) = counts.iter().max_by_key(|(_, c)| **c) {
            if k > 0 {
                for n in drop_points(cp.m, cp.alpha, k, n_max) {
                    if let (Some(a), Some(b)) = (at(&pts, n), at(&pts, n + 1)) {
                        drops.push(vec![m1.to_string(), k.to_string(), n.to_string(), fmt_f(a.fdr.mean), fmt_f(b.fdr.mean)]);
                    }
                }
            }
        }
        plot.add(case.label.clone(), pts.iter().filter(|q| cp.n_values.contains(&q.n)).map(|q| (q.n as f64, q.fdr.mean)).collect());
    }
    out.extra.push(("r_i_law".into(), laws));
    out.extra.push(("drops".into(), drops));
    out.plot = Some(plot);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drop_points_examples() {
        let a = Level::new(1, 10).unwrap();
        assert_eq!(drop_points(100, a, 1, 2000), vec![999, 1999]);
        assert_eq!(drop_points(100, a, 2, 2000), vec![499, 999, 1499, 1999]);
        assert_eq!(drop_points(100, a, 3, 2000), vec![999, 1999]);
        assert_eq!(drop_points(100, a, 4, 1000), vec![249, 499, 749, 999]);
    }
}
