//! Reproducible simulation studies.
//!
//! Every experiment is addressed by an [`ExperimentName`], takes string-keyed
//! parameters with documented defaults, and returns an [`ExperimentOutput`]
//! made of CSV tables, optional extra tables, an optional plot and a list of
//! pass/fail checks. Runs with the same seed and parameters are identical
//! regardless of the number of worker threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{config, usage, Error, Result};
use crate::generator::Reference;
use crate::io::Table;
use crate::level::Level;
use crate::metrics::MeanSe;
use crate::sim::{CalScheme, Engine};

mod atypicity;
mod conformal;
mod convergence;
mod fdr_vs_n;
mod heuristic;
mod lord;
mod overlap;
pub mod plot;
mod sweep;

pub use plot::{LinePlot, Series};
pub use sweep::{default_n_grid, run_sweep, SweepCase, SweepPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentName {
    FdrVsN,
    FnrVsN,
    MfdrAtypicity,
    DisjointVsOverlap,
    Convergence,
    CompareLord,
    OverlapTables,
    HeuristicTable,
    ConformalCompare,
    IntermediateDrops,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 10] = [
        ExperimentName::FdrVsN,
        ExperimentName::FnrVsN,
        ExperimentName::MfdrAtypicity,
        ExperimentName::DisjointVsOverlap,
        ExperimentName::Convergence,
        ExperimentName::CompareLord,
        ExperimentName::OverlapTables,
        ExperimentName::HeuristicTable,
        ExperimentName::ConformalCompare,
        ExperimentName::IntermediateDrops,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::FdrVsN => "FdrVsN",
            ExperimentName::FnrVsN => "FnrVsN",
            ExperimentName::MfdrAtypicity => "MfdrAtypicity",
            ExperimentName::DisjointVsOverlap => "DisjointVsOverlap",
            ExperimentName::Convergence => "Convergence",
            ExperimentName::CompareLord => "CompareLord",
            ExperimentName::OverlapTables => "OverlapTables",
            ExperimentName::HeuristicTable => "HeuristicTable",
            ExperimentName::ConformalCompare => "ConformalCompare",
            ExperimentName::IntermediateDrops => "IntermediateDrops",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            ExperimentName::FdrVsN => "FDR of BH on empirical p-values as a function of the calibration size n",
            ExperimentName::FnrVsN => "FNR of BH on empirical p-values for admissible n, against the oracle FNR",
            ExperimentName::MfdrAtypicity => "mFDR, FDR and FNR of BH and mBH on oracle p-values as anomalies get more atypical",
            ExperimentName::DisjointVsOverlap => "mFDR and FNR of mBH on disjoint versus overlapping windows",
            ExperimentName::Convergence => "cumulative FDP of overlapping mBH along the stream",
            ExperimentName::CompareLord => "mBH against LORD3 with oracle, fixed and sliding calibration",
            ExperimentName::OverlapTables => "FDR for overlapping calibration sets and a permutation test across strategies",
            ExperimentName::HeuristicTable => "E[R] against E[R(i)] for BH on empirical p-values",
            ExperimentName::ConformalCompare => "FDR and FNR of empirical against conformal p-values",
            ExperimentName::IntermediateDrops => "FDR drops at intermediate n for several anomaly counts",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    /// Case-insensitive; `fdr-vs-n` and `fdr_vs_n` also work.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_ascii_lowercase();
        ExperimentName::ALL
            .iter()
            .find(|e| e.as_str().to_ascii_lowercase() == key)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = ExperimentName::ALL.iter().map(|e| e.as_str()).collect();
                Error::Usage(format!("unknown experiment '{s}'; expected one of {}", names.join(", ")))
            })
    }
}

/// String-keyed overrides. Getters record the keys they were asked for and
/// their defaults, so unknown keys can be reported and defaults listed.
#[derive(Debug, Clone, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
    used: BTreeSet<String>,
    defaults: Vec<(String, String)>,
}

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    /// Set `key` (normalized to snake_case) to `value`.
    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }

    /// Parse `key=value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        match pair.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                self.set(k, v);
                Ok(())
            }
            _ => usage(format!("expected key=value, got '{pair}'")),
        }
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// `(key, default)` pairs in the order they were requested.
    pub fn defaults(&self) -> &[(String, String)] {
        &self.defaults
    }

    fn raw(&mut self, key: &str, default: String) -> Option<String> {
        self.used.insert(key.to_string());
        self.defaults.push((key.to_string(), default));
        self.values.get(key).cloned()
    }

    fn typed<T: FromStr>(&mut self, key: &str, default: T, shown: String) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key, shown) {
            None => Ok(default),
            Some(v) => v.parse::<T>().map_err(|e| Error::Config(format!("parameter {key}='{v}': {e}"))),
        }
    }

    pub fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        self.typed(key, default, default.to_string())
    }

    pub fn u64(&mut self, key: &str, default: u64) -> Result<u64> {
        self.typed(key, default, default.to_string())
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.typed(key, default, default.to_string())?;
        if !v.is_finite() {
            return config(format!("parameter {key} must be finite"));
        }
        Ok(v)
    }

    pub fn level(&mut self, key: &str, default: &str) -> Result<Level> {
        let v = self.raw(key, default.to_string()).unwrap_or_else(|| default.to_string());
        v.parse().map_err(|e| Error::Config(format!("parameter {key}: {e}")))
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        self.raw(key, default.to_string()).unwrap_or_else(|| default.to_string())
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&mut self, key: &str, default: &str) -> Result<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw(key, default.to_string()).unwrap_or_else(|| default.to_string());
        let items: Result<Vec<T>> = v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|e| Error::Config(format!("parameter {key}: '{s}': {e}"))))
            .collect();
        let items = items?;
        if items.is_empty() {
            return config(format!("parameter {key} must not be empty"));
        }
        Ok(items)
    }

    /// Fail on keys that no getter asked for.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&str> = self.values.keys().filter(|k| !self.used.contains(*k)).map(|s| s.as_str()).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            config(format!("unknown parameter(s): {}", unknown.join(", ")))
        }
    }
}

/// What to run.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    pub params: Params,
    pub seed: u64,
    /// Reduced replication counts with widened check tolerances.
    pub quick: bool,
}

impl ExperimentSpec {
    pub fn new(name: ExperimentName, seed: u64) -> Self {
        ExperimentSpec { name, params: Params::new(), seed, quick: false }
    }

    pub fn quick(mut self, quick: bool) -> Self {
        self.quick = quick;
        self
    }

    pub fn set(mut self, key: &str, value: &str) -> Self {
        self.params.set(key, value);
        self
    }
}

/// One pass/fail verdict computed from an experiment's own output.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub name: ExperimentName,
    /// Per-replication or per-grid-point rows.
    pub results: Table,
    /// `scenario, metric, estimate, std_error, replications`.
    pub summary: Table,
    /// Additional named tables, written as `<name>.csv`.
    pub extra: Vec<(String, Table)>,
    pub checks: Vec<Check>,
    pub plot: Option<LinePlot>,
}

impl ExperimentOutput {
    fn new(name: ExperimentName, results: Table) -> Self {
        ExperimentOutput { name, results, summary: summary_table(), extra: Vec::new(), checks: Vec::new(), plot: None }
    }

    fn summarize(&mut self, scenario: &str, metric: &str, v: MeanSe) {
        self.summary.push(vec![scenario.to_string(), metric.to_string(), fmt_f(v.mean), fmt_f(v.se), v.n.to_string()]);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn summary_table() -> Table {
    Table::new(["scenario", "metric", "estimate", "std_error", "replications"])
}

/// Shortest round-trip representation.
pub(crate) fn fmt_f(x: f64) -> String {
    format!("{x}")
}

/// Run an experiment. Unknown parameters are configuration errors.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let mut params = spec.params.clone();
    let ctx = Ctx { seed: spec.seed, quick: spec.quick };
    let out = match spec.name {
        ExperimentName::FdrVsN => fdr_vs_n::run_fdr(&mut params, ctx)?,
        ExperimentName::FnrVsN => fdr_vs_n::run_fnr(&mut params, ctx)?,
        ExperimentName::MfdrAtypicity => atypicity::run_atypicity(&mut params, ctx)?,
        ExperimentName::DisjointVsOverlap => atypicity::run_disjoint_vs_overlap(&mut params, ctx)?,
        ExperimentName::Convergence => convergence::run(&mut params, ctx)?,
        ExperimentName::CompareLord => lord::run(&mut params, ctx)?,
        ExperimentName::OverlapTables => overlap::run(&mut params, ctx)?,
        ExperimentName::HeuristicTable => heuristic::run(&mut params, ctx)?,
        ExperimentName::ConformalCompare => conformal::run(&mut params, ctx)?,
        ExperimentName::IntermediateDrops => conformal::run_drops(&mut params, ctx)?,
    };
    Ok(out)
}

/// Parameter names and defaults of an experiment, in the quick or full variant.
pub fn defaults(name: ExperimentName, quick: bool) -> Result<Vec<(String, String)>> {
    let mut p = Params::new();
    let ctx = Ctx { seed: 0, quick };
    match name {
        ExperimentName::FdrVsN => drop(fdr_vs_n::FdrParams::read(&mut p, ctx)?),
        ExperimentName::FnrVsN => drop(fdr_vs_n::FnrParams::read(&mut p, ctx)?),
        ExperimentName::MfdrAtypicity => drop(atypicity::AtypicityParams::read(&mut p, ctx)?),
        ExperimentName::DisjointVsOverlap => drop(atypicity::DvoParams::read(&mut p, ctx)?),
        ExperimentName::Convergence => drop(convergence::ConvParams::read(&mut p, ctx)?),
        ExperimentName::CompareLord => drop(lord::LordParamsX::read(&mut p, ctx)?),
        ExperimentName::OverlapTables => drop(overlap::OverlapParams::read(&mut p, ctx)?),
        ExperimentName::HeuristicTable => drop(heuristic::HeurParams::read(&mut p, ctx)?),
        ExperimentName::ConformalCompare => drop(conformal::ConfParams::read(&mut p, ctx)?),
        ExperimentName::IntermediateDrops => drop(conformal::DropsParams::read(&mut p, ctx)?),
    }
    let mut seen = BTreeSet::new();
    Ok(p.defaults().iter().filter(|(k, _)| seen.insert(k.clone())).cloned().collect())
}

/// Write `results.csv`, `summary.csv`, extra tables and, if asked, `plot.svg`
/// under `<dir>/<name>/`. Returns the files written.
pub fn write_output(out: &ExperimentOutput, dir: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    let base = dir.join(out.name.as_str());
    std::fs::create_dir_all(&base)?;
    let mut files = Vec::new();
    let mut emit = |name: &str, t: &Table| -> Result<()> {
        let p = base.join(name);
        t.write_file(&p)?;
        files.push(p);
        Ok(())
    };
    emit("results.csv", &out.results)?;
    emit("summary.csv", &out.summary)?;
    for (name, t) in &out.extra {
        emit(&format!("{name}.csv"), t)?;
    }
    if plot {
        if let Some(p) = &out.plot {
            let path = base.join("plot.svg");
            std::fs::write(&path, p.to_svg())?;
            files.push(path);
        }
    }
    Ok(files)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Ctx {
    pub seed: u64,
    pub quick: bool,
}

impl Ctx {
    /// Replication count: the `replications` parameter, divided by 10 in quick mode.
    pub fn reps(&self, p: &mut Params, full: usize) -> Result<usize> {
        let default = if self.quick { (full / 10).max(1) } else { full };
        let r = p.usize("replications", default)?;
        if r == 0 {
            return config("replications must be >= 1");
        }
        Ok(r)
    }

    /// Tolerance widening for checks in quick mode (sqrt of the replication ratio).
    pub fn widen(&self) -> f64 {
        if self.quick {
            10f64.sqrt()
        } else {
            1.0
        }
    }
}

/// `gaussian` or `student<dof>`.
pub(crate) fn parse_reference(s: &str) -> Result<Reference> {
    let s = s.trim().to_ascii_lowercase();
    if s == "gaussian" || s == "normal" {
        return Ok(Reference::GaussianStd);
    }
    if let Some(d) = s.strip_prefix("student") {
        let dof: u32 = d.trim_start_matches(['-', '_', ':']).parse().map_err(|_| Error::Config(format!("bad reference law '{s}'")))?;
        let r = Reference::Student { dof };
        r.validate()?;
        return Ok(r);
    }
    config(format!("unknown reference law '{s}' (gaussian, student<dof>)"))
}

/// `same`, `iid` or `overlap:<s>`.
pub(crate) fn parse_scheme(s: &str) -> Result<CalScheme> {
    let s = s.trim().to_ascii_lowercase();
    match s.as_str() {
        "same" => Ok(CalScheme::Same),
        "iid" => Ok(CalScheme::Iid),
        _ => {
            let v = s
                .strip_prefix("overlap:")
                .or_else(|| s.strip_prefix("overlap-"))
                .ok_or_else(|| Error::Config(format!("unknown calibration scheme '{s}' (same, iid, overlap:<s>)")))?;
            let lv: Level = v.parse().map_err(|e| Error::Config(format!("overlap shift: {e}")))?;
            if lv.is_zero() {
                return config("overlap shift must be > 0");
            }
            Ok(CalScheme::Overlap(lv))
        }
    }
}

pub(crate) fn parse_engine(s: &str) -> Result<Engine> {
    match s.trim().to_ascii_lowercase().as_str() {
        "direct" => Ok(Engine::Direct),
        "transformed" => Ok(Engine::Transformed),
        other => config(format!("unknown engine '{other}' (direct, transformed)")),
    }
}

/// Ascending, deduplicated.
pub(crate) fn sorted_unique(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

/// `points_per_decade` log-spaced values from `10^lo` to `10^hi`, rounded to 4 significant digits.
pub(crate) fn log_grid(lo: i32, hi: i32, points_per_decade: usize) -> Vec<f64> {
    let steps = ((hi - lo) as usize) * points_per_decade;
    (0..=steps)
        .map(|i| {
            let e = lo as f64 + i as f64 / points_per_decade as f64;
            let x = 10f64.powf(e);
            let digits = 3 - x.log10().floor() as i32;
            let scale = 10f64.powi(digits);
            (x * scale).round() / scale
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse_loosely() {
        for e in ExperimentName::ALL {
            assert_eq!(e.as_str().parse::<ExperimentName>().unwrap(), e);
            assert_eq!(e.as_str().to_lowercase().parse::<ExperimentName>().unwrap(), e);
        }
        assert_eq!("fdr-vs-n".parse::<ExperimentName>().unwrap(), ExperimentName::FdrVsN);
        assert!(matches!("nope".parse::<ExperimentName>(), Err(Error::Usage(_))));
    }

    #[test]
    fn unknown_parameters_are_reported() {
        let mut p = Params::new();
        p.set("m", "10");
        p.set("bogus", "1");
        assert_eq!(p.usize("m", 100).unwrap(), 10);
        assert!(p.finish().is_err());
        let mut p = Params::new();
        p.set_pair("m = 7").unwrap();
        assert_eq!(p.usize("m", 100).unwrap(), 7);
        p.finish().unwrap();
        assert!(p.set_pair("novalue").is_err());
    }

    #[test]
    fn list_and_level_params() {
        let mut p = Params::new();
        p.set("alphas", "0.05, 0.1");
        let a: Vec<Level> = p.list("alphas", "0.2").unwrap();
        assert_eq!(a, vec![Level::new(1, 20).unwrap(), Level::new(1, 10).unwrap()]);
        let d: Vec<f64> = p.list("deltas", "3.5,4").unwrap();
        assert_eq!(d, vec![3.5, 4.0]);
        p.set("bad", "x");
        assert!(p.usize("bad", 1).is_err());
    }

    #[test]
    fn parsers() {
        assert_eq!(parse_reference("Student5").unwrap(), Reference::Student { dof: 5 });
        assert!(parse_reference("student0").is_err());
        assert_eq!(parse_scheme("overlap:0.5").unwrap(), CalScheme::Overlap(Level::new(1, 2).unwrap()));
        assert!(parse_scheme("overlap:0").is_err());
        assert_eq!(parse_engine("Transformed").unwrap(), Engine::Transformed);
    }

    #[test]
    fn log_grid_hits_decades() {
        let g = log_grid(0, 4, 4);
        assert_eq!(g.len(), 17);
        for d in [1.0, 10.0, 100.0, 1000.0, 10000.0] {
            assert!(g.contains(&d), "{d}");
        }
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn every_experiment_lists_defaults() {
        for e in ExperimentName::ALL {
            let d = defaults(e, false).unwrap();
            assert!(d.iter().any(|(k, _)| k == "replications"), "{e}");
        }
    }
}
