//! FDR under overlapping calibration sets, with a permutation test across strategies.

use super::{fmt_f, parse_engine, parse_scheme, sorted_unique, Check, Ctx, ExperimentName, ExperimentOutput, LinePlot, Params};
use crate::error::{config, Result};
use crate::io::Table;
use crate::prds::{prds_sanity_check, run_overlap_grid, grid_strategies, OverlapScenario, BONFERRONI_THRESHOLD, GRID_N};
use crate::rng::derive_seed;
use crate::sim::{CalScheme, Engine};

pub(crate) struct OverlapParams {
    pub scenario: OverlapScenario,
    pub strategies: Vec<CalScheme>,
    pub n_values: Vec<usize>,
    pub permutations: u64,
    pub prds_n: usize,
    pub prds_replications: usize,
}

impl OverlapParams {
    pub fn read(p: &mut Params, ctx: Ctx) -> Result<Self> {
        let m = p.usize("m", 100)?;
        let m1 = p.usize("m1", 1)?;
        let shift = p.f64("delta", 4.0)?;
        let alpha = p.level("alpha", "0.1")?;
        let engine: Engine = parse_engine(&p.string("engine", "direct"))?;
        let default_strats: Vec<String> = grid_strategies()
            .iter()
            .map(|s| match s {
                CalScheme::Overlap(l) => format!("overlap:{l}"),
                other => other.label(),
            })
            .collect();
        let strategies: Result<Vec<CalScheme>> =
            p.list::<String>("strategies", &default_strats.join(","))?.iter().map(|s| parse_scheme(s)).collect();
        let default_n: Vec<String> = GRID_N.iter().map(|n| n.to_string()).collect();
        let n_values = sorted_unique(p.list("n_values", &default_n.join(","))?);
        let permutations = p.u64("permutations", 10_000)?;
        let prds_n = p.usize("prds_n", 250)?;
        let replications = ctx.reps(p, 1000)?;
        let prds_replications = p.usize("prds_replications", if ctx.quick { 1000 } else { 10_000 })?;
        if m == 0 || m1 > m || n_values.contains(&0) || permutations == 0 || prds_n == 0 || prds_replications == 0 {
            return config("need m >= 1, m1 <= m, positive n values, permutations and PRDS settings");
        }
        Ok(OverlapParams {
            scenario: OverlapScenario { m, m1, shift, alpha, replications, engine },
            strategies: strategies?,
            n_values,
            permutations,
            prds_n,
            prds_replications,
        })
    }
}

pub(crate) fn run(p: &mut Params, ctx: Ctx) -> Result<ExperimentOutput> {
    let op = OverlapParams::read(p, ctx)?;
    p.finish()?;
    let sc = &op.scenario;
    let grid = run_overlap_grid(&op.strategies, &op.n_values, sc, ctx.seed, op.permutations)?;
    let mut out = ExperimentOutput::new(
        ExperimentName::OverlapTables,
        Table::new(["strategy", "n", "fdr", "fdr_se", "replications"]),
    );
    let mut header = vec!["strategy".to_string()];
    header.extend(op.n_values.iter().map(|n| format!("n={n}")));
    let mut by_strategy = Table::new(header);
    let mut plot = LinePlot::new("FDR by calibration strategy", "n", "FDR");
    for (si, s) in op.strategies.iter().enumerate() {
        let mut row = vec![s.label()];
        for (ni, &n) in op.n_values.iter().enumerate() {
            let v = grid.fdr[si][ni];
            out.results.push(vec![s.label(), n.to_string(), fmt_f(v.mean), fmt_f(v.se), v.n.to_string()]);
            out.summarize(&s.label(), &format!("fdr@n={n}"), v);
            row.push(format!("{:.3}", v.mean));
        }
        by_strategy.push(row);
        plot.add(s.label(), op.n_values.iter().enumerate().map(|(ni, &n)| (n as f64, grid.fdr[si][ni].mean)).collect());
    }
    let mut perm_tests = Table::new(["n", "max_gap", "p_value", "exact", "resamples"]);
    for (ni, &n) in op.n_values.iter().enumerate() {
        let r = &grid.permutation[ni];
        perm_tests.push(vec![n.to_string(), fmt_f(r.statistic), fmt_f(r.p_value), r.exact.to_string(), r.resamples.to_string()]);
    }
    if op.strategies.len() > 1 {
        let min_p = grid.permutation.iter().map(|r| r.p_value).fold(1.0, f64::min);
        out.checks.push(Check::new(
            format!("permutation p-values all above {BONFERRONI_THRESHOLD}"),
            min_p > BONFERRONI_THRESHOLD,
            format!("smallest p-value {min_p:.4}"),
        ));
    }

    let m0 = (sc.m - sc.m1) as f64;
    let bound = m0 * sc.alpha.as_f64() / sc.m as f64;
    let pos = |n: usize| op.n_values.iter().position(|&x| x == n);
    if let (Some(a), Some(b)) = (pos(999), pos(1000)) {
        for (si, s) in op.strategies.iter().enumerate() {
            let (l, r) = (grid.fdr[si][a], grid.fdr[si][b]);
            out.checks.push(Check::new(
                format!("{}: FDR(n=999) < FDR(n=1000)", s.label()),
                l.mean < r.mean,
                format!("{:.4} vs {:.4}", l.mean, r.mean),
            ));
        }
    }
    // n = l m / alpha - 1 with overlapping calibration: upper-bound control
    for (ni, &n) in op.n_values.iter().enumerate() {
        if crate::multiple_testing::matches_cardinality(n as u64, sc.m, sc.alpha).is_none() {
            continue;
        }
        for (si, s) in op.strategies.iter().enumerate() {
            if !matches!(s, CalScheme::Overlap(_) | CalScheme::Same) {
                continue;
            }
            let v = grid.fdr[si][ni];
            let lim = bound + 3.0 * ctx.widen() * v.se;
            out.checks.push(Check::new(
                format!("{}: FDR(n={n}) <= m0 alpha / m + 3 SE", s.label()),
                v.mean <= lim,
                format!("FDR={:.4}, limit {lim:.4}", v.mean),
            ));
        }
    }

    let mut prds = Table::new(["scheme", "n", "bucket_lo", "bucket_hi", "count", "frequency", "se", "monotone", "flat"]);
    let half = CalScheme::Overlap(crate::Level::new(1, 2)?);
    for (k, scheme) in [CalScheme::Same, half, CalScheme::Iid].into_iter().enumerate() {
        let r = prds_sanity_check(scheme, op.prds_n, sc.m, sc.alpha, 5, op.prds_replications, derive_seed(ctx.seed, 2_000_000 + k as u64))?;
        for b in &r.buckets {
            prds.push(vec![
                scheme.label(),
                op.prds_n.to_string(),
                fmt_f(b.lo),
                fmt_f(b.hi),
                b.count.to_string(),
                fmt_f(b.frequency),
                fmt_f(b.se),
                r.monotone.to_string(),
                r.flat.to_string(),
            ]);
        }
    }
    out.extra.push(("fdr_by_strategy".into(), by_strategy));
    out.extra.push(("permutation_tests".into(), perm_tests));
    out.extra.push(("prds".into(), prds));
    out.plot = Some(plot);
    Ok(out)
}
