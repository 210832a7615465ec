//! Cumulative FDP of overlapping mBH along oracle p-value streams.

use rayon::prelude::*;

use super::atypicity::oracle_config;
use super::{fmt_f, Check, Ctx, ExperimentName, ExperimentOutput, LinePlot, Params};
use crate::detector::{run_stream, Windowing};
use crate::error::{config, Result};
use crate::generator::oracle_pvalues_with;
use crate::io::Table;
use crate::level::Level;
use crate::metrics::{ratio, MeanSe};
use crate::rng::{derive_seed, stream};

pub(crate) struct ConvParams {
    pub m: usize,
    pub length: usize,
    pub alphas: Vec<Level>,
    pub pis: Vec<Level>,
    pub delta: f64,
    pub every: usize,
    pub band: f64,
    pub reps: usize,
}

impl ConvParams {
    pub fn read(p: &mut Params, ctx: Ctx) -> Result<Self> {
        let m = p.usize("m", 100)?;
        let length = p.usize("length", 10_000)?;
        let alphas: Vec<Level> = p.list("alphas", "0.05,0.1,0.2")?;
        let pis: Vec<Level> = p.list("pis", "0.01,0.02")?;
        let delta = p.f64("delta", 1000.0)?;
        let every = p.usize("checkpoint_every", 100)?;
        let band = p.f64("band", 0.02)?;
        if m == 0 || every == 0 || length < m {
            return config("need m >= 1, checkpoint_every >= 1 and length >= m");
        }
        if alphas.iter().chain(&pis).any(|l| l.is_zero()) {
            return config("alphas and pis must be > 0");
        }
        Ok(ConvParams { m, length, alphas, pis, delta, every, band, reps: ctx.reps(p, 100)? })
    }
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn run(p: &mut Params, ctx: Ctx) -> Result<ExperimentOutput> {
    let cp = ConvParams::read(p, ctx)?;
    p.finish()?;
    let checkpoints: Vec<usize> = (1..=cp.length / cp.every).map(|k| k * cp.every).collect();
    let mut out = ExperimentOutput::new(
        ExperimentName::Convergence,
        Table::new(["alpha", "pi", "replication", "t", "fdp", "rejections"]),
    );
    let mut bands = Table::new(["alpha", "pi", "t", "median", "q025", "q975", "mean", "fraction_in_band"]);
    let mut plot = LinePlot::new("Cumulative FDP of overlapping mBH (median)", "t", "FDP");
    let mut cell = 0u64;
    for &alpha in &cp.alphas {
        for &pi in &cp.pis {
            let seed = derive_seed(ctx.seed, cell);
            cell += 1;
            let cfg = oracle_config(cp.m, Windowing::Overlapping, alpha, pi);
            // per replication: (fdp, rejections) at each checkpoint
            let runs: Vec<Vec<(f64, u64)>> = (0..cp.reps)
                .into_par_iter()
                .map(|b| -> Result<Vec<(f64, u64)>> {
                    let mut rng = stream(seed, b as u64);
                    let (ps, labels) = oracle_pvalues_with(pi.as_f64(), cp.delta, cp.length, &mut rng)?;
                    let recs = run_stream(&ps, Some(&labels), &cfg)?;
                    let (mut r, mut fp) = (0u64, 0u64);
                    let mut res = Vec::with_capacity(checkpoints.len());
                    let mut next = 0;
                    for rec in &recs {
                        if rec.is_decided() && rec.decision {
                            r += 1;
                            fp += u64::from(!rec.label.unwrap_or(false));
                        }
                        if next < checkpoints.len() && rec.t == checkpoints[next] {
                            res.push((ratio(fp, r), r));
                            next += 1;
                        }
                    }
                    Ok(res)
                })
                .collect::<Result<Vec<_>>>()?;
            for (b, run) in runs.iter().enumerate() {
                for (k, &(f, r)) in run.iter().enumerate() {
                    out.results.push(vec![
                        alpha.to_string(),
                        pi.to_string(),
                        b.to_string(),
                        checkpoints[k].to_string(),
                        fmt_f(f),
                        r.to_string(),
                    ]);
                }
            }
            let a = alpha.as_f64();
            let mut median_curve = Vec::new();
            let mut check_value = None;
            for (k, &t) in checkpoints.iter().enumerate() {
                let mut v: Vec<f64> = runs.iter().map(|r| r[k].0).collect();
                let ms = MeanSe::of(&v);
                v.sort_by(f64::total_cmp);
                let inside = v.iter().filter(|&&x| x >= a - cp.band && x <= a + cp.band).count() as f64 / v.len() as f64;
                let med = quantile(&v, 0.5);
                bands.push(vec![
                    alpha.to_string(),
                    pi.to_string(),
                    t.to_string(),
                    fmt_f(med),
                    fmt_f(quantile(&v, 0.025)),
                    fmt_f(quantile(&v, 0.975)),
                    fmt_f(ms.mean),
                    fmt_f(inside),
                ]);
                median_curve.push((t as f64, med));
                if [2000, 5000, 10_000].contains(&t) {
                    let scen = format!("alpha={alpha}:pi={pi}:t={t}");
                    out.summarize(&scen, "fdp", ms);
                    out.summarize(&scen, "fraction_in_band", MeanSe { mean: inside, se: f64::NAN, n: v.len() });
                }
                if t == 2000 {
                    check_value = Some(inside);
                }
            }
            plot.add(format!("a={alpha} pi={pi}"), median_curve);
            plot.hlines.push(a);
            if alpha == Level::new(1, 20)? && pi == Level::new(1, 50)? && cp.delta == 1000.0 && cp.band == 0.02 && cp.m == 100 {
                if let Some(inside) = check_value {
                    let need = 0.9 - 0.05 * (ctx.widen() - 1.0);
                    out.checks.push(Check::new(
                        format!("alpha=0.05 pi=0.02: at t=2000 at least {need:.3} of runs have FDP in [0.03, 0.07]"),
                        inside >= need,
                        format!("fraction={inside:.3}"),
                    ));
                }
            }
        }
    }
    out.extra.push(("bands".into(), bands));
    out.plot = Some(plot);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }
}
