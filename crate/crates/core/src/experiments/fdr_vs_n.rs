//! FDR and FNR of BH on empirical p-values against the calibration size.

use super::sweep::{at, default_n_grid, run_sweep, SweepCase, SweepPoint};
use super::{fmt_f, parse_engine, parse_reference, parse_scheme, sorted_unique, Check, Ctx, ExperimentName, ExperimentOutput, LinePlot, Params};
use crate::error::{config, Result};
use crate::generator::{matched_shift, Reference};
use crate::io::Table;
use crate::level::Level;
use crate::metrics::{fnp, MeanSe};
use crate::multiple_testing::calibration_cardinality;
use crate::rng::{derive_seed, stream};
use crate::sim::{oracle_window, CalScheme, Engine};

/// Shift giving `reference` the same tail mass beyond it as N(0,1) beyond `delta`.
pub(crate) fn shift_for(reference: Reference, delta: f64) -> f64 {
    match reference {
        Reference::GaussianStd => delta,
        Reference::Student { dof } => matched_shift(delta, dof),
    }
}

pub(crate) fn n_values(p: &mut Params) -> Result<Vec<usize>> {
    let raw = p.string("n_values", "grid");
    if raw.trim() == "grid" {
        return Ok(default_n_grid());
    }
    let v: Result<Vec<usize>> = raw
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| crate::Error::Config(format!("n_values: '{s}': {e}"))))
        .collect();
    let v = sorted_unique(v?);
    if v.is_empty() || v[0] == 0 {
        return config("n_values must be positive");
    }
    Ok(v)
}

pub(crate) struct FdrParams {
    pub m: usize,
    pub m1: usize,
    pub alpha: Level,
    pub deltas: Vec<f64>,
    pub references: Vec<Reference>,
    pub n_values: Vec<usize>,
    pub scheme: CalScheme,
    pub engine: Engine,
    pub reps: usize,
}

impl FdrParams {
    pub fn read(p: &mut Params, ctx: Ctx) -> Result<Self> {
        let m = p.usize("m", 100)?;
        let m1 = p.usize("m1", 1)?;
        if m == 0 || m1 > m {
            return config("need m >= 1 and m1 <= m");
        }
        let alpha = p.level("alpha", "0.1")?;
        let deltas: Vec<f64> = p.list("deltas", "3.5,4")?;
        let references: Result<Vec<Reference>> =
            p.list::<String>("references", "gaussian,student5")?.iter().map(|s| parse_reference(s)).collect();
        Ok(FdrParams {
            m,
            m1,
            alpha,
            deltas,
            references: references?,
            n_values: n_values(p)?,
            scheme: parse_scheme(&p.string("calibration", "same"))?,
            engine: parse_engine(&p.string("engine", "direct"))?,
            reps: ctx.reps(p, 10_000)?,
        })
    }
}

fn scenario_label(r: Reference, delta: f64) -> String {
    format!("{}:delta={}", r.label(), delta)
}

pub(crate) fn run_fdr(p: &mut Params, ctx: Ctx) -> Result<ExperimentOutput> {
    let fp = FdrParams::read(p, ctx)?;
    p.finish()?;
    let mut out = ExperimentOutput::new(
        ExperimentName::FdrVsN,
        Table::new([
            "scenario", "reference", "delta", "shift", "n", "fdr", "fdr_se", "fnr", "fnr_se", "formula", "replications",
        ]),
    );
    let mut plot = LinePlot::new("FDR of BH with empirical p-values", "n", "FDR");
    plot.hlines.push(fp.alpha.as_f64() * (fp.m - fp.m1) as f64 / fp.m as f64);
    let mut curves: Vec<(Reference, f64, Vec<SweepPoint>)> = Vec::new();
    for (ri, &r) in fp.references.iter().enumerate() {
        for (di, &delta) in fp.deltas.iter().enumerate() {
            let shift = shift_for(r, delta);
            let case = SweepCase { label: scenario_label(r, delta), reference: r, shift, m: fp.m, m1: fp.m1 };
            let seed = derive_seed(ctx.seed, (ri * 1000 + di) as u64);
            let pts = run_sweep(&case, &fp.n_values, fp.alpha, fp.scheme, fp.engine, fp.reps, seed)?;
            for q in &pts {
                out.results.push(vec![
                    case.label.clone(),
                    r.label(),
                    fmt_f(delta),
                    fmt_f(shift),
                    q.n.to_string(),
                    fmt_f(q.fdr.mean),
                    fmt_f(q.fdr.se),
                    fmt_f(q.fnr.mean),
                    fmt_f(q.fnr.se),
                    fmt_f(q.formula),
                    fp.reps.to_string(),
                ]);
            }
            for n in [999, 1000, 1499, 1500, 1999, 2000] {
                if let Some(q) = at(&pts, n) {
                    out.summarize(&case.label, &format!("fdr@n={n}"), q.fdr);
                    out.summarize(&case.label, &format!("fnr@n={n}"), q.fnr);
                }
            }
            let dev = pts.iter().map(|q| (q.formula - q.fdr.mean).abs()).fold(0.0, f64::max);
            out.summarize(&case.label, "max_abs_formula_minus_mc", MeanSe { mean: dev, se: f64::NAN, n: fp.reps });
            plot.add(case.label.clone(), pts.iter().map(|q| (q.n as f64, q.fdr.mean)).collect());
            curves.push((r, delta, pts));
        }
    }
    out.plot = Some(plot);

    // thin against thick tails, pointwise over the grid
    let mut max_gap = None;
    for &delta in &fp.deltas {
        let g = curves.iter().find(|c| c.0 == Reference::GaussianStd && c.1 == delta);
        for s in curves.iter().filter(|c| c.0 != Reference::GaussianStd && c.1 == delta) {
            if let Some(g) = g {
                let gap = g.2.iter().zip(&s.2).map(|(a, b)| (a.fdr.mean - b.fdr.mean).abs()).fold(0.0, f64::max);
                let label = format!("delta={delta}:{}-vs-{}", g.0.label(), s.0.label());
                out.summarize(&label, "max_abs_fdr_gap", MeanSe { mean: gap, se: f64::NAN, n: fp.reps });
                max_gap = Some(max_gap.map_or(gap, |x: f64| x.max(gap)));
            }
        }
    }

    let w = ctx.widen();
    let g4 = curves.iter().find(|c| c.0 == Reference::GaussianStd && c.1 == 4.0);
    if let (Some(g4), true) = (g4, fp.m == 100 && fp.m1 == 1 && fp.alpha == Level::new(1, 10)?) {
        for (lo, hi) in [(999, 1000), (1999, 2000)] {
            if let (Some(a), Some(b)) = (at(&g4.2, lo), at(&g4.2, hi)) {
                let (blo, bhi) = (0.093 - (w - 1.0) * 0.006, 0.105 + (w - 1.0) * 0.006);
                out.checks.push(Check::new(
                    format!("gaussian delta=4: FDR(n={lo}) in [{blo:.4}, {bhi:.4}]"),
                    a.fdr.mean >= blo && a.fdr.mean <= bhi,
                    format!("FDR={:.4} (se {:.4})", a.fdr.mean, a.fdr.se),
                ));
                let min_jump = 0.03 - (w - 1.0) * 0.005;
                let jump = b.fdr.mean - a.fdr.mean;
                out.checks.push(Check::new(
                    format!("gaussian delta=4: FDR(n={hi}) - FDR(n={lo}) >= {min_jump:.4}"),
                    jump >= min_jump,
                    format!("jump={jump:.4}"),
                ));
            }
        }
    }
    if let Some(gap) = max_gap {
        let tol = 0.02 * w;
        out.checks.push(Check::new(
            format!("gaussian and student curves within {tol:.3} pointwise"),
            gap <= tol,
            format!("max gap={gap:.4}"),
        ));
    }
    Ok(out)
}

pub(crate) struct FnrParams {
    pub m: usize,
    pub alpha: Level,
    /// `(delta, m1)` pairs.
    pub cases: Vec<(f64, usize)>,
    pub ell_max: u64,
    pub reference: Reference,
    pub scheme: CalScheme,
    pub engine: Engine,
    pub reps: usize,
}

impl FnrParams {
    pub fn read(p: &mut Params, ctx: Ctx) -> Result<Self> {
        let m = p.usize("m", 100)?;
        let alpha = p.level("alpha", "0.1")?;
        let raw: Vec<String> = p.list("cases", "4:1,3.5:1,3:1,3:5")?;
        let mut cases = Vec::new();
        for c in raw {
            let (d, k) = c.split_once(':').ok_or_else(|| crate::Error::Config(format!("case '{c}' is not delta:m1")))?;
            let d: f64 = d.trim().parse().map_err(|_| crate::Error::Config(format!("case '{c}': bad delta")))?;
            let k: usize = k.trim().parse().map_err(|_| crate::Error::Config(format!("case '{c}': bad m1")))?;
            if k == 0 || k > m {
                return config(format!("case '{c}': need 1 <= m1 <= m"));
            }
            cases.push((d, k));
        }
        let ell_max = p.u64("ell_max", 10)?;
        if ell_max == 0 {
            return config("ell_max must be >= 1");
        }
        Ok(FnrParams {
            m,
            alpha,
            cases,
            ell_max,
            reference: parse_reference(&p.string("reference", "gaussian"))?,
            scheme: parse_scheme(&p.string("calibration", "same"))?,
            engine: parse_engine(&p.string("engine", "direct"))?,
            reps: ctx.reps(p, 10_000)?,
        })
    }
}

pub(crate) fn run_fnr(p: &mut Params, ctx: Ctx) -> Result<ExperimentOutput> {
    let fp = FnrParams::read(p, ctx)?;
    p.finish()?;
    if fp.alpha.is_zero() {
        return config("alpha must be > 0");
    }
    let mut out = ExperimentOutput::new(
        ExperimentName::FnrVsN,
        Table::new([
            "case", "delta", "m1", "ell", "n", "fnr", "fnr_se", "fdr", "fdr_se", "oracle_fnr", "oracle_fnr_se", "replications",
        ]),
    );
    let mut plot = LinePlot::new("FNR of BH with empirical p-values", "n", "FNR");
    let n_values: Vec<usize> = (1..=fp.ell_max).map(|l| calibration_cardinality(fp.m, fp.alpha, l) as usize).collect();
    let w = ctx.widen();
    for (ci, &(delta, m1)) in fp.cases.iter().enumerate() {
        let shift = shift_for(fp.reference, delta);
        let label = format!("delta={delta}:m1={m1}");
        let case = SweepCase { label: label.clone(), reference: fp.reference, shift, m: fp.m, m1 };
        let seed = derive_seed(ctx.seed, ci as u64);
        let pts = run_sweep(&case, &n_values, fp.alpha, fp.scheme, fp.engine, fp.reps, seed)?;
        let anomaly_p = fp.reference.survival(shift);
        let oseed = derive_seed(seed, u64::MAX);
        let oracle: Result<Vec<f64>> = (0..fp.reps)
            .map(|b| oracle_window(fp.m, m1, anomaly_p, fp.alpha, &mut stream(oseed, b as u64)).map(|c| fnp(&c)))
            .collect();
        let oracle = MeanSe::of(&oracle?);
        for (l, q) in pts.iter().enumerate() {
            out.results.push(vec![
                label.clone(),
                fmt_f(delta),
                m1.to_string(),
                (l + 1).to_string(),
                q.n.to_string(),
                fmt_f(q.fnr.mean),
                fmt_f(q.fnr.se),
                fmt_f(q.fdr.mean),
                fmt_f(q.fdr.se),
                fmt_f(oracle.mean),
                fmt_f(oracle.se),
                fp.reps.to_string(),
            ]);
        }
        out.summarize(&label, "oracle_fnr", oracle);
        let first = &pts[0];
        let last = pts.last().expect("ell_max >= 1");
        out.summarize(&label, &format!("fnr@n={}", first.n), first.fnr);
        out.summarize(&label, &format!("fnr@n={}", last.n), last.fnr);
        plot.add(label.clone(), pts.iter().map(|q| (q.n as f64, q.fnr.mean)).collect());
        if pts.len() > 1 {
            let slack = 3.0 * w * (first.fnr.se.powi(2) + last.fnr.se.powi(2) + 2.0 * oracle.se.powi(2)).sqrt();
            let g_first = (first.fnr.mean - oracle.mean).abs();
            let g_last = (last.fnr.mean - oracle.mean).abs();
            out.checks.push(Check::new(
                format!("{label}: FNR at n={} no farther from the oracle than at n={}", last.n, first.n),
                g_last <= g_first + slack,
                format!("|gap| {g_first:.4} -> {g_last:.4} (slack {slack:.4})"),
            ));
        }
    }
    out.plot = Some(plot);
    Ok(out)
}
