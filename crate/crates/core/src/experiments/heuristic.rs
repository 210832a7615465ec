//! `E[R]` against `E[R(i)]` for BH on empirical p-values.

use super::fdr_vs_n::shift_for;
use super::{fmt_f, parse_engine, parse_reference, parse_scheme, Check, Ctx, ExperimentName, ExperimentOutput, Params};
use crate::error::{config, Result};
use crate::generator::Reference;
use crate::io::Table;
use crate::level::Level;
use crate::metrics::MeanSe;
use crate::multiple_testing::calibration_cardinality;
use crate::pvalues::PValue;
use crate::rng::derive_seed;
use crate::sim::{draw_counts, CalScheme, Engine, Scratch, WindowDesign};
use crate::theory::{heuristic_gap, mfdr_from_rejections};

pub(crate) struct HeurParams {
    pub m: usize,
    pub m1: usize,
    pub delta: f64,
    pub alphas: Vec<Level>,
    pub ell: u64,
    pub reference: Reference,
    pub scheme: CalScheme,
    pub engine: Engine,
    pub reps: usize,
}

impl HeurParams {
    pub fn read(p: &mut Params, ctx: Ctx) -> Result<Self> {
        let m = p.usize("m", 100)?;
        let m1 = p.usize("m1", 2)?;
        let delta = p.f64("delta", 4.0)?;
        let alphas: Vec<Level> = p.list("alphas", "0.05,0.1,0.2")?;
        let ell = p.u64("ell", 1)?;
        if m == 0 || m1 >= m || ell == 0 || alphas.iter().any(|a| a.is_zero()) {
            return config("need m1 < m, ell >= 1 and alphas > 0");
        }
        Ok(HeurParams {
            m,
            m1,
            delta,
            alphas,
            ell,
            reference: parse_reference(&p.string("reference", "gaussian"))?,
            scheme: parse_scheme(&p.string("calibration", "same"))?,
            engine: parse_engine(&p.string("engine", "direct"))?,
            reps: ctx.reps(p, 1000)?,
        })
    }
}

pub(crate) fn run(p: &mut Params, ctx: Ctx) -> Result<ExperimentOutput> {
    let hp = HeurParams::read(p, ctx)?;
    p.finish()?;
    let mut out = ExperimentOutput::new(
        ExperimentName::HeuristicTable,
        Table::new(["alpha", "n", "replication", "r", "r_i"]),
    );
    let mut heur_summary = Table::new([
        "alpha", "n", "mean_r", "mean_r_se", "mean_r_i", "mean_r_i_se", "gap", "increment", "mfdr_heuristic", "saturated",
    ]);
    let sampler = hp.reference.sampler()?;
    let tol = 0.3 * ctx.widen();
    for (ai, &alpha) in hp.alphas.iter().enumerate() {
        let n = calibration_cardinality(hp.m, alpha, hp.ell) as usize;
        let d = WindowDesign {
            m: hp.m,
            m1: hp.m1,
            shift: shift_for(hp.reference, hp.delta),
            reference: hp.reference,
            n,
            scheme: hp.scheme,
            engine: hp.engine,
        };
        let mut scratch = Scratch::default();
        let labels: Vec<bool> = (0..hp.m).map(|i| i < hp.m1).collect();
        let rep = heuristic_gap(hp.reps, alpha, derive_seed(ctx.seed, ai as u64), |rng| {
            draw_counts(&d, &sampler, rng, &mut scratch);
            (scratch.counts.iter().map(|&c| PValue::exact(c, n as u64)).collect(), labels.clone())
        })?;
        for (b, &(r, ri)) in rep.samples.iter().enumerate() {
            out.results.push(vec![alpha.to_string(), n.to_string(), b.to_string(), r.to_string(), ri.to_string()]);
        }
        let er = MeanSe::of(&rep.samples.iter().map(|s| s.0 as f64).collect::<Vec<_>>());
        let eri = MeanSe::of(&rep.samples.iter().map(|s| s.1 as f64).collect::<Vec<_>>());
        let scen = format!("alpha={alpha}:n={n}");
        out.summarize(&scen, "mean_r", er);
        out.summarize(&scen, "mean_r_i", eri);
        let diffs: Vec<f64> = rep.samples.iter().map(|s| s.1 as f64 - s.0 as f64 - 1.0).collect();
        out.summarize(&scen, "gap", MeanSe::of(&diffs));
        let mfdr = mfdr_from_rejections(alpha.as_f64(), hp.m - hp.m1, hp.m, rep.mean_r_i, rep.mean_r);
        heur_summary.push(vec![
            alpha.to_string(),
            n.to_string(),
            fmt_f(er.mean),
            fmt_f(er.se),
            fmt_f(eri.mean),
            fmt_f(eri.se),
            fmt_f(rep.gap),
            fmt_f(rep.increment),
            fmt_f(mfdr),
            rep.saturated.to_string(),
        ]);
        out.checks.push(Check::new(
            format!("alpha={alpha}: |E[R(i)] - (E[R] + 1)| <= {tol:.2}"),
            rep.gap.abs() <= tol,
            format!("E[R]={:.3}, E[R(i)]={:.3}, gap={:.3}", rep.mean_r, rep.mean_r_i, rep.gap),
        ));
    }
    out.extra.push(("heuristic_summary".into(), heur_summary));
    Ok(out)
}
