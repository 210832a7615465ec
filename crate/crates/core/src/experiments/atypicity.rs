//! mBH on oracle p-values: atypicity sweep and disjoint against overlapping windows.

use rand::Rng as _;
use rayon::prelude::*;

use super::{fmt_f, log_grid, Check, Ctx, ExperimentName, ExperimentOutput, LinePlot, Params};
use crate::detector::{run_stream, DetectorConfig, DetectionRecord, Windowing};
use crate::error::{config, Result};
use crate::generator::oracle_pvalues_with;
use crate::io::Table;
use crate::level::Level;
use crate::metrics::{fdp, fnp, ratio, ConfusionCounts, MeanSe};
use crate::multiple_testing::{bh, mbh_alpha_prime, ThresholdPolicy};
use crate::pvalues::{PValue, PValueKind, Strategy};
use crate::rng::{derive_seed, stream};
use crate::scoring::ScoreFunction;

fn delta_grid(p: &mut Params, per_decade: usize) -> Result<Vec<f64>> {
    let default: Vec<String> = log_grid(0, 4, per_decade).iter().map(|d| d.to_string()).collect();
    let v: Vec<f64> = p.list("deltas", &default.join(","))?;
    if v.iter().any(|&d| d < 1.0) {
        return config("atypicity levels must be >= 1");
    }
    Ok(v)
}

pub(crate) struct AtypicityParams {
    pub m: usize,
    pub windows: usize,
    pub alphas: Vec<Level>,
    pub pis: Vec<Level>,
    pub deltas: Vec<f64>,
    pub reps: usize,
}

impl AtypicityParams {
    pub fn read(p: &mut Params, ctx: Ctx) -> Result<Self> {
        let m = p.usize("m", 100)?;
        let windows = p.usize("windows", 50)?;
        if m == 0 || windows == 0 {
            return config("m and windows must be >= 1");
        }
        let alphas: Vec<Level> = p.list("alphas", "0.05,0.1,0.2")?;
        let pis: Vec<Level> = p.list("pis", "0.01,0.07")?;
        if alphas.iter().chain(&pis).any(|l| l.is_zero()) {
            return config("alphas and pis must be > 0");
        }
        Ok(AtypicityParams { m, windows, alphas, pis, deltas: delta_grid(p, 4)?, reps: ctx.reps(p, 100)? })
    }
}

/// Anomaly count per window: `round(m pi)`.
fn anomaly_count(m: usize, pi: Level) -> usize {
    ((m as f64 * pi.as_f64()).round() as usize).min(m)
}

#[derive(Debug, Clone, Copy, Default)]
struct Rep {
    mfdr: f64,
    fdr: f64,
    fnr: f64,
}

fn rep_of(windows: &[ConfusionCounts]) -> Rep {
    let mut tot = ConfusionCounts::default();
    for w in windows {
        tot.merge(w);
    }
    let k = windows.len() as f64;
    Rep {
        mfdr: ratio(tot.false_positives, tot.rejections),
        fdr: windows.iter().map(fdp).sum::<f64>() / k,
        fnr: windows.iter().map(fnp).sum::<f64>() / k,
    }
}

pub(crate) fn run_atypicity(p: &mut Params, ctx: Ctx) -> Result<ExperimentOutput> {
    let ap = AtypicityParams::read(p, ctx)?;
    p.finish()?;
    let mut out = ExperimentOutput::new(
        ExperimentName::MfdrAtypicity,
        Table::new(["alpha", "pi", "delta", "procedure", "replication", "mfdr", "fdr", "fnr"]),
    );
    let mut plot = LinePlot::new("mFDR against atypicity", "delta", "mFDR");
    plot.log_x = true;
    let m = ap.m;
    let mut cell = 0u64;
    for &alpha in &ap.alphas {
        for &pi in &ap.pis {
            let m1 = anomaly_count(m, pi);
            let alpha_prime = mbh_alpha_prime(alpha, m, pi)?;
            let mut curves: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
            let mut plateau_ok = true;
            let mut plateau_detail = Vec::new();
            for &delta in &ap.deltas {
                let seed = derive_seed(ctx.seed, cell);
                cell += 1;
                let reps: Vec<[Rep; 2]> = (0..ap.reps)
                    .into_par_iter()
                    .map(|b| -> Result<[Rep; 2]> {
                        let mut rng = stream(seed, b as u64);
                        let mut per = [Vec::with_capacity(ap.windows), Vec::with_capacity(ap.windows)];
                        for _ in 0..ap.windows {
                            let ps: Vec<PValue> = (0..m)
                                .map(|i| {
                                    let u: f64 = rng.random();
                                    PValue::Real(if i < m1 { u / delta } else { u })
                                })
                                .collect();
                            for (j, level) in [alpha, alpha_prime].into_iter().enumerate() {
                                let r = bh(&ps, level)?;
                                let mut c = ConfusionCounts::default();
                                for i in 0..m {
                                    c.record(r.is_rejected(i), i < m1);
                                }
                                per[j].push(c);
                            }
                        }
                        Ok([rep_of(&per[0]), rep_of(&per[1])])
                    })
                    .collect::<Result<Vec<_>>>()?;
                for (j, proc_name) in ["BH", "mBH"].iter().enumerate() {
                    for (b, r) in reps.iter().enumerate() {
                        out.results.push(vec![
                            alpha.to_string(),
                            pi.to_string(),
                            fmt_f(delta),
                            proc_name.to_string(),
                            b.to_string(),
                            fmt_f(r[j].mfdr),
                            fmt_f(r[j].fdr),
                            fmt_f(r[j].fnr),
                        ]);
                    }
                    let scen = format!("alpha={alpha}:pi={pi}:delta={delta}:{proc_name}");
                    let mfdr = MeanSe::of(&reps.iter().map(|r| r[j].mfdr).collect::<Vec<_>>());
                    let fnr = MeanSe::of(&reps.iter().map(|r| r[j].fnr).collect::<Vec<_>>());
                    out.summarize(&scen, "mfdr", mfdr);
                    out.summarize(&scen, "fdr", MeanSe::of(&reps.iter().map(|r| r[j].fdr).collect::<Vec<_>>()));
                    out.summarize(&scen, "fnr", fnr);
                    curves[j].push((delta, mfdr.mean));
                    if j == 1 && delta >= 100.0 {
                        let target = (1.0 - pi.as_f64()) * alpha.as_f64();
                        let tol = 0.015 * ctx.widen();
                        let ok = (mfdr.mean - target).abs() <= tol && fnr.mean == 0.0;
                        plateau_ok &= ok;
                        plateau_detail.push(format!("delta={delta}: mFDR={:.4} FNR={:.4}", mfdr.mean, fnr.mean));
                    }
                }
            }
            for (j, proc_name) in ["BH", "mBH"].iter().enumerate() {
                plot.add(format!("{proc_name} a={alpha} pi={pi}"), std::mem::take(&mut curves[j]));
            }
            if alpha == Level::new(1, 5)? && pi == Level::new(7, 100)? && m == 100 && !plateau_detail.is_empty() {
                let target = (1.0 - pi.as_f64()) * alpha.as_f64();
                out.checks.push(Check::new(
                    format!("mBH alpha=0.2 pi=0.07: mFDR = {target:.3} +/- {:.4} and FNR = 0 for delta >= 100", 0.015 * ctx.widen()),
                    plateau_ok,
                    plateau_detail.join("; "),
                ));
            }
        }
    }
    out.plot = Some(plot);
    Ok(out)
}

pub(crate) struct DvoParams {
    pub m: usize,
    pub length: usize,
    /// `(alpha, pi)` pairs.
    pub pairs: Vec<(Level, Level)>,
    pub deltas: Vec<f64>,
    pub reps: usize,
}

impl DvoParams {
    pub fn read(p: &mut Params, ctx: Ctx) -> Result<Self> {
        let m = p.usize("m", 100)?;
        let length = p.usize("length", 10_000)?;
        if m == 0 || length < 2 * m {
            return config("need m >= 1 and length >= 2m");
        }
        let raw: Vec<String> = p.list("pairs", "0.1:0.01,0.1:0.02,0.2:0.02")?;
        let mut pairs = Vec::new();
        for s in raw {
            let (a, q) = s.split_once(':').ok_or_else(|| crate::Error::Config(format!("pair '{s}' is not alpha:pi")))?;
            let a: Level = a.parse()?;
            let q: Level = q.parse()?;
            if a.is_zero() || q.is_zero() {
                return config(format!("pair '{s}': alpha and pi must be > 0"));
            }
            pairs.push((a, q));
        }
        Ok(DvoParams { m, length, pairs, deltas: delta_grid(p, 2)?, reps: ctx.reps(p, 100)? })
    }
}

/// Pooled counts over complete blocks `[km, (k+1)m)`, skipping block 0.
pub(crate) fn block_counts(records: &[DetectionRecord], m: usize) -> Result<ConfusionCounts> {
    let full = records.len() / m * m;
    crate::detector::counts_from_records(&records[m.min(full)..full], true)
}

pub(crate) fn oracle_config(m: usize, windowing: Windowing, alpha: Level, pi: Level) -> DetectorConfig {
    DetectorConfig {
        window: m,
        windowing,
        policy: ThresholdPolicy::Mbh { alpha, pi_hat: pi },
        pvalue: PValueKind::Precomputed,
        strategy: Strategy::Fixed,
        n: 1,
        score: ScoreFunction::Identity,
        force_n: true,
    }
}

pub(crate) fn run_disjoint_vs_overlap(p: &mut Params, ctx: Ctx) -> Result<ExperimentOutput> {
    let dp = DvoParams::read(p, ctx)?;
    p.finish()?;
    let mut out = ExperimentOutput::new(
        ExperimentName::DisjointVsOverlap,
        Table::new(["alpha", "pi", "delta", "windowing", "replication", "mfdr", "fnr", "rejections", "false_positives"]),
    );
    let mut plot = LinePlot::new("mFDR of mBH: disjoint against overlapping windows", "delta", "mFDR");
    plot.log_x = true;
    let mut cell = 0u64;
    for &(alpha, pi) in &dp.pairs {
        let mut curves: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
        for &delta in &dp.deltas {
            let seed = derive_seed(ctx.seed, cell);
            cell += 1;
            let reps: Vec<[ConfusionCounts; 2]> = (0..dp.reps)
                .into_par_iter()
                .map(|b| -> Result<[ConfusionCounts; 2]> {
                    let mut rng = stream(seed, b as u64);
                    let (ps, labels) = oracle_pvalues_with(pi.as_f64(), delta, dp.length, &mut rng)?;
                    let mut res = [ConfusionCounts::default(); 2];
                    for (j, w) in [Windowing::Disjoint, Windowing::Overlapping].into_iter().enumerate() {
                        let recs = run_stream(&ps, Some(&labels), &oracle_config(dp.m, w, alpha, pi))?;
                        res[j] = block_counts(&recs, dp.m)?;
                    }
                    Ok(res)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut means = [(MeanSe::default(), MeanSe::default()); 2];
            for (j, name) in ["disjoint", "overlapping"].iter().enumerate() {
                let mut mf = Vec::new();
                let mut fn_ = Vec::new();
                for (b, r) in reps.iter().enumerate() {
                    let c = &r[j];
                    let mfdr = ratio(c.false_positives, c.rejections);
                    let fnr = ratio(c.false_negatives, c.anomalies);
                    mf.push(mfdr);
                    fn_.push(fnr);
                    out.results.push(vec![
                        alpha.to_string(),
                        pi.to_string(),
                        fmt_f(delta),
                        name.to_string(),
                        b.to_string(),
                        fmt_f(mfdr),
                        fmt_f(fnr),
                        c.rejections.to_string(),
                        c.false_positives.to_string(),
                    ]);
                }
                let scen = format!("alpha={alpha}:pi={pi}:delta={delta}:{name}");
                means[j] = (MeanSe::of(&mf), MeanSe::of(&fn_));
                out.summarize(&scen, "mfdr", means[j].0);
                out.summarize(&scen, "fnr", means[j].1);
                curves[j].push((delta, means[j].0.mean));
            }
            if alpha == Level::new(1, 10)? && pi == Level::new(1, 100)? && delta == 1000.0 && dp.m == 100 {
                let tol = 0.02 * ctx.widen();
                let dm = (means[0].0.mean - means[1].0.mean).abs();
                let df = (means[0].1.mean - means[1].1.mean).abs();
                out.checks.push(Check::new(
                    format!("alpha=0.1 pi=0.01 delta=1000: |mFDR_d - mFDR_o| <= {tol:.3}"),
                    dm <= tol,
                    format!("disjoint {:.4}, overlapping {:.4}", means[0].0.mean, means[1].0.mean),
                ));
                out.checks.push(Check::new(
                    format!("alpha=0.1 pi=0.01 delta=1000: |FNR_d - FNR_o| <= {tol:.3}"),
                    df <= tol,
                    format!("disjoint {:.4}, overlapping {:.4}", means[0].1.mean, means[1].1.mean),
                ));
            }
        }
        for (j, name) in ["disjoint", "overlapping"].iter().enumerate() {
            plot.add(format!("{name} a={alpha} pi={pi}"), std::mem::take(&mut curves[j]));
        }
    }
    out.plot = Some(plot);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anomaly_counts_round() {
        assert_eq!(anomaly_count(100, Level::new(7, 100).unwrap()), 7);
        assert_eq!(anomaly_count(100, Level::new(1, 200).unwrap()), 1);
    }

    #[test]
    fn block_counts_skip_first_and_partial_blocks() {
        let rec = |t: usize, d: bool, l: bool| DetectionRecord {
            t,
            pvalue: None,
            threshold: None,
            decision: d,
            label: Some(l),
            status: crate::detector::RecordStatus::Decided,
        };
        let recs: Vec<DetectionRecord> = (0..7).map(|i| rec(i + 1, true, i % 2 == 0)).collect();
        let c = block_counts(&recs, 3).unwrap();
        // records 3, 4, 5 only
        assert_eq!(c.rejections, 3);
        assert_eq!(c.false_positives, 2);
    }
}
