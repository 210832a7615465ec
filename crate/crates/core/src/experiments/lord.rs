//! mBH against LORD3 on mixture streams under four p-value modes.

use rayon::prelude::*;

use super::{fmt_f, parse_reference, Check, Ctx, ExperimentName, ExperimentOutput, Params};
use crate::detector::{counts_from_records, lord_policy, run_stream, run_stream_with, DetectorConfig, Windowing};
use crate::error::{config, Result};
use crate::generator::{mixture_with, Reference};
use crate::io::Table;
use crate::level::Level;
use crate::metrics::{fdp, fnp, MeanSe};
use crate::multiple_testing::ThresholdPolicy;
use crate::pvalues::{CalibrationSet, PValueKind, Strategy};
use crate::rng::{derive_seed, stream};
use crate::scoring::ScoreFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    Oracle,
    FixedCal,
    SlidingCalStar,
    SlidingCal,
}

impl Mode {
    fn label(&self) -> &'static str {
        match self {
            Mode::Oracle => "Oracle",
            Mode::FixedCal => "FixedCal",
            Mode::SlidingCalStar => "SlidingCal-star",
            Mode::SlidingCal => "SlidingCal",
        }
    }

    fn parse(s: &str) -> Result<Mode> {
        match s.trim().to_ascii_lowercase().replace(['-', '_', '*'], "").as_str() {
            "oracle" => Ok(Mode::Oracle),
            "fixed" | "fixedcal" => Ok(Mode::FixedCal),
            "slidingstar" | "slidingcalstar" => Ok(Mode::SlidingCalStar),
            "sliding" | "slidingcal" => Ok(Mode::SlidingCal),
            other => config(format!("unknown p-value mode '{other}' (oracle, fixed, sliding-star, sliding)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Proc {
    Mbh,
    Lord3,
}

impl Proc {
    fn label(&self) -> &'static str {
        match self {
            Proc::Mbh => "mBH",
            Proc::Lord3 => "LORD3",
        }
    }
}

pub(crate) struct LordParamsX {
    pub length: usize,
    pub m: usize,
    pub pi: Level,
    pub deltas: Vec<f64>,
    pub alphas: Vec<Level>,
    pub modes: Vec<Mode>,
    pub procs: Vec<Proc>,
    pub reference: Reference,
    /// `n = ell m / alpha - 1`; `None` uses that rule with `ell = 1`.
    pub n: Option<usize>,
    pub reps: usize,
}

impl LordParamsX {
    pub fn read(p: &mut Params, ctx: Ctx) -> Result<Self> {
        let length = p.usize("length", 10_000)?;
        let m = p.usize("m", 100)?;
        let pi = p.level("pi", "0.01")?;
        let deltas: Vec<f64> = p.list("deltas", "3,3.5,4")?;
        let alphas: Vec<Level> = p.list("alphas", "0.1,0.2")?;
        let modes: Result<Vec<Mode>> =
            p.list::<String>("modes", "oracle,fixed,sliding-star,sliding")?.iter().map(|s| Mode::parse(s)).collect();
        let procs: Result<Vec<Proc>> = p
            .list::<String>("procedures", "mbh,lord3")?
            .iter()
            .map(|s| match s.to_ascii_lowercase().as_str() {
                "mbh" => Ok(Proc::Mbh),
                "lord3" | "lord" => Ok(Proc::Lord3),
                other => config(format!("unknown procedure '{other}' (mbh, lord3)")),
            })
            .collect();
        let reference = parse_reference(&p.string("reference", "gaussian"))?;
        let n = p.usize("n", 0)?;
        if m == 0 || pi.is_zero() || alphas.iter().any(|a| a.is_zero()) {
            return config("m, pi and alphas must be > 0");
        }
        Ok(LordParamsX {
            length,
            m,
            pi,
            deltas,
            alphas,
            modes: modes?,
            procs: procs?,
            reference,
            n: (n > 0).then_some(n),
            reps: ctx.reps(p, 100)?,
        })
    }

    fn n_for(&self, alpha: Level) -> usize {
        self.n.unwrap_or_else(|| {
            // floor(m / alpha) - 1
            (alpha.denom() as u128 * self.m as u128 / alpha.numer() as u128) as usize - 1
        })
    }
}

fn detector_config(lp: &LordParamsX, mode: Mode, pr: Proc, alpha: Level) -> DetectorConfig {
    let policy = match pr {
        Proc::Mbh => ThresholdPolicy::Mbh { alpha, pi_hat: lp.pi },
        Proc::Lord3 => lord_policy(alpha),
    };
    let (pvalue, strategy) = match mode {
        Mode::Oracle => (PValueKind::Oracle(lp.reference), Strategy::Fixed),
        Mode::FixedCal => (PValueKind::Empirical, Strategy::Fixed),
        Mode::SlidingCalStar => (PValueKind::Empirical, Strategy::SlidingOracle),
        Mode::SlidingCal => (PValueKind::Empirical, Strategy::SlidingEstimated),
    };
    DetectorConfig {
        window: lp.m,
        windowing: Windowing::Overlapping,
        policy,
        pvalue,
        strategy,
        n: lp.n_for(alpha),
        score: ScoreFunction::Identity,
        force_n: true,
    }
}

pub(crate) fn run(p: &mut Params, ctx: Ctx) -> Result<ExperimentOutput> {
    let lp = LordParamsX::read(p, ctx)?;
    p.finish()?;
    let mut out = ExperimentOutput::new(
        ExperimentName::CompareLord,
        Table::new(["delta", "alpha", "mode", "procedure", "n", "replication", "fdp", "fnp", "rejections"]),
    );
    let mut proc_summary = Table::new(["delta", "alpha", "mode", "procedure", "fdr", "fdr_se", "fnr", "fnr_se"]);
    let sampler = lp.reference.sampler()?;
    let n_max = lp.alphas.iter().map(|&a| lp.n_for(a)).max().unwrap_or(1);
    let w = ctx.widen();
    for (di, &delta) in lp.deltas.iter().enumerate() {
        let seed = derive_seed(ctx.seed, di as u64);
        // series and calibration draws are shared across modes, procedures and levels
        let per_series: Vec<Vec<(f64, f64, u64)>> = (0..lp.reps)
            .into_par_iter()
            .map(|b| -> Result<Vec<(f64, f64, u64)>> {
                let mut rng = stream(seed, b as u64);
                let series = mixture_with(lp.pi.as_f64(), lp.reference, delta, lp.length, &mut rng)?;
                let calib: Vec<f64> = (0..n_max).map(|_| sampler.sample(&mut rng)).collect();
                let mut res = Vec::new();
                for &alpha in &lp.alphas {
                    for &mode in &lp.modes {
                        for &pr in &lp.procs {
                            let cfg = detector_config(&lp, mode, pr, alpha);
                            let recs = if mode == Mode::Oracle {
                                run_stream(&series.values, Some(&series.labels), &cfg)?
                            } else {
                                let set = CalibrationSet::with_scores(cfg.strategy, cfg.n, &calib[..cfg.n])?;
                                run_stream_with(&series.values, Some(&series.labels), &cfg, set)?
                            };
                            let c = counts_from_records(&recs, false)?;
                            res.push((fdp(&c), fnp(&c), c.rejections));
                        }
                    }
                }
                Ok(res)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut k = 0;
        for &alpha in &lp.alphas {
            for &mode in &lp.modes {
                for &pr in &lp.procs {
                    let n = lp.n_for(alpha);
                    let mut f = Vec::with_capacity(lp.reps);
                    let mut g = Vec::with_capacity(lp.reps);
                    for (b, s) in per_series.iter().enumerate() {
                        let (fd, fnp_, r) = s[k];
                        f.push(fd);
                        g.push(fnp_);
                        out.results.push(vec![
                            fmt_f(delta),
                            alpha.to_string(),
                            mode.label().into(),
                            pr.label().into(),
                            n.to_string(),
                            b.to_string(),
                            fmt_f(fd),
                            fmt_f(fnp_),
                            r.to_string(),
                        ]);
                    }
                    k += 1;
                    let (fdr, fnr) = (MeanSe::of(&f), MeanSe::of(&g));
                    let scen = format!("delta={delta}:alpha={alpha}:{}:{}", mode.label(), pr.label());
                    out.summarize(&scen, "fdr", fdr);
                    out.summarize(&scen, "fnr", fnr);
                    proc_summary.push(vec![
                        fmt_f(delta),
                        alpha.to_string(),
                        mode.label().into(),
                        pr.label().into(),
                        fmt_f(fdr.mean),
                        fmt_f(fdr.se),
                        fmt_f(fnr.mean),
                        fmt_f(fnr.se),
                    ]);
                    if delta == 4.0 && alpha == Level::new(1, 10)? && lp.n.is_none() && lp.m == 100 && lp.pi == Level::new(1, 100)? {
                        let tol = 0.03 * w;
                        match (mode, pr) {
                            (Mode::Oracle, Proc::Mbh) => {
                                out.checks.push(Check::new(
                                    format!("mBH/Oracle delta=4 alpha=0.1: FDR = 0.101 +/- {tol:.3}"),
                                    (fdr.mean - 0.101).abs() <= tol,
                                    format!("FDR={:.4}", fdr.mean),
                                ));
                                out.checks.push(Check::new(
                                    format!("mBH/Oracle delta=4 alpha=0.1: FNR = 0.020 +/- {tol:.3}"),
                                    (fnr.mean - 0.020).abs() <= tol,
                                    format!("FNR={:.4}", fnr.mean),
                                ));
                            }
                            (Mode::SlidingCal, Proc::Mbh) => out.checks.push(Check::new(
                                format!("mBH/SlidingCal delta=4 alpha=0.1: FDR >= {:.3}", 0.25 - (tol - 0.03)),
                                fdr.mean >= 0.25 - (tol - 0.03),
                                format!("FDR={:.4}", fdr.mean),
                            )),
                            (Mode::SlidingCalStar, Proc::Lord3) => out.checks.push(Check::new(
                                format!("LORD3/SlidingCal-star delta=4 alpha=0.1: FNR >= {:.3}", 0.6 - (tol - 0.03)),
                                fnr.mean >= 0.6 - (tol - 0.03),
                                format!("FNR={:.4}", fnr.mean),
                            )),
                            _ => {}
                        }
                    }
                }
            }
        }
    }
    out.extra.push(("procedure_summary".into(), proc_summary));
    Ok(out)
}
