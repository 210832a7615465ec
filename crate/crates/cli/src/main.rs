//! `online-fdr` command-line front end.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use online_fdr::detector::{counts_from_records, run_stream, DetectorConfig, Windowing};
use online_fdr::experiments::{self, ExperimentName, ExperimentSpec, Params};
use online_fdr::generator::{generate_mixture, generate_oracle_pvalues, MixtureConfig, OraclePValueConfig, Reference};
use online_fdr::io::{read_series, write_records, write_series};
use online_fdr::metrics::{fdp, fnp};
use online_fdr::multiple_testing::{calibration_cardinality, LordParams, ThresholdPolicy};
use online_fdr::pvalues::{PValueKind, Strategy};
use online_fdr::scoring::{fit_zscore, ScoreFunction};
use online_fdr::{Error, Level};

const DEFAULT_SEED: u64 = 20_240_501;

#[derive(Parser, Debug)]
#[command(name = "online-fdr", version, about = "Online anomaly detection with false discovery rate control")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Divide replication counts by 10 and widen check tolerances.
    #[arg(long, global = true)]
    quick: bool,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,
    /// Output directory for experiment artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key = value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled series (`t,value,label`).
    Simulate(SimulateArgs),
    /// Run the streaming detector over a `t,value[,label]` CSV.
    Detect(DetectArgs),
    /// Run a named experiment and write CSV artifacts.
    Experiment(ExperimentArgs),
    /// List the experiments.
    List,
    /// Print every default as a config file.
    ShowConfig {
        /// Restrict to one experiment.
        name: Option<String>,
    },
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Anomaly proportion.
    #[arg(long, default_value_t = 0.01)]
    pi: f64,
    /// Reference law: gaussian or student<dof>.
    #[arg(long, default_value = "gaussian")]
    reference: String,
    /// Anomaly location.
    #[arg(long, default_value_t = 4.0)]
    shift: f64,
    #[arg(long, default_value_t = 10_000)]
    length: usize,
    /// Emit oracle p-values with this atypicity level instead of observations.
    #[arg(long)]
    oracle_delta: Option<f64>,
    #[arg(long)]
    no_labels: bool,
    /// Output file (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// Input CSV (`-` or omitted for stdin).
    input: Option<PathBuf>,
    /// Window length m.
    #[arg(long, default_value_t = 100)]
    window: usize,
    /// overlapping or disjoint.
    #[arg(long, default_value = "overlapping")]
    windowing: String,
    /// bh, mbh or lord3.
    #[arg(long, default_value = "mbh")]
    policy: String,
    #[arg(long, default_value = "0.1")]
    alpha: String,
    /// Anomaly proportion assumed by mBH.
    #[arg(long, default_value = "0.01")]
    pi: String,
    /// empirical, conformal, oracle-gaussian, oracle-student<dof> or precomputed.
    #[arg(long, default_value = "empirical")]
    pvalue: String,
    /// fixed, sliding or sliding-oracle (needs labels).
    #[arg(long, default_value = "sliding")]
    calibration: String,
    /// Calibration size; defaults to ceil(ell m / level) - 1.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    ell: u64,
    /// Accept a calibration size outside the admissible grid.
    #[arg(long)]
    force_n: bool,
    /// identity, zscore, knn:<k> or kde:<bandwidth>.
    #[arg(long, default_value = "identity")]
    score: String,
    /// Training series for the score function.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Print FDP and FNP to stderr when labels are present.
    #[arg(long)]
    summary: bool,
    /// Output file (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment name (see `list`).
    name: String,
    /// Parameter override `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for `--set replications=N`.
    #[arg(long)]
    replications: Option<usize>,
    /// Exit with status 2 if any built-in check fails.
    #[arg(long)]
    check: bool,
}

/// Failure modes mapped to exit codes.
enum Failure {
    Usage(String),
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(format!("i/o: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn fail<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

/// Global settings and per-experiment sections read from a config file.
#[derive(Debug, Default)]
struct FileConfig {
    seed: Option<u64>,
    jobs: Option<usize>,
    quick: Option<bool>,
    plot: Option<bool>,
    out: Option<PathBuf>,
    sections: Vec<(String, String, String)>,
}

fn parse_bool(key: &str, v: &str) -> CliResult<bool> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => fail(format!("config: {key} expects a boolean, got '{v}'")),
    }
}

fn parse_config(text: &str) -> CliResult<FileConfig> {
    let mut cfg = FileConfig::default();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let e: ExperimentName = name.trim().parse().map_err(|e: Error| Failure::Usage(format!("config line {}: {e}", i + 1)))?;
            section = Some(e.as_str().to_string());
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return fail(format!("config line {}: expected key = value", i + 1));
        };
        let (k, v) = (k.trim(), v.trim());
        match &section {
            Some(s) => cfg.sections.push((s.clone(), k.to_string(), v.to_string())),
            None => match k {
                "seed" => cfg.seed = Some(v.parse().map_err(|_| Failure::Usage(format!("config line {}: bad seed", i + 1)))?),
                "jobs" => cfg.jobs = Some(v.parse().map_err(|_| Failure::Usage(format!("config line {}: bad jobs", i + 1)))?),
                "quick" => cfg.quick = Some(parse_bool(k, v)?),
                "plot" => cfg.plot = Some(parse_bool(k, v)?),
                "out" => cfg.out = Some(PathBuf::from(v)),
                other => return fail(format!("config line {}: unknown global key '{other}'", i + 1)),
            },
        }
    }
    Ok(cfg)
}

/// Effective global settings after merging the config file and the flags.
struct Globals {
    seed: u64,
    quick: bool,
    plot: bool,
    out: PathBuf,
    file: FileConfig,
}

fn globals(cli: &Cli) -> CliResult<Globals> {
    let file = match &cli.config {
        Some(p) => parse_config(&std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?)?,
        None => FileConfig::default(),
    };
    let jobs = cli.jobs.or(file.jobs);
    if let Some(j) = jobs {
        if j == 0 {
            return fail("--jobs must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    Ok(Globals {
        seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        quick: cli.quick || file.quick.unwrap_or(false),
        plot: cli.plot || file.plot.unwrap_or(false),
        out: cli.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("results")),
        file,
    })
}

fn output_writer(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_reference(s: &str) -> CliResult<Reference> {
    let s = s.trim().to_ascii_lowercase();
    if s == "gaussian" || s == "normal" {
        return Ok(Reference::GaussianStd);
    }
    if let Some(d) = s.strip_prefix("student") {
        if let Ok(dof) = d.trim_start_matches(['-', '_', ':']).parse::<u32>() {
            let r = Reference::Student { dof };
            r.validate()?;
            return Ok(r);
        }
    }
    fail(format!("unknown reference law '{s}' (gaussian, student<dof>)"))
}

fn cmd_simulate(a: &SimulateArgs, g: &Globals) -> CliResult<()> {
    let mut w = output_writer(&a.output)?;
    if let Some(delta) = a.oracle_delta {
        let (p, labels) = generate_oracle_pvalues(&OraclePValueConfig { pi: a.pi, delta, length: a.length, seed: g.seed })?;
        let series = online_fdr::generator::LabeledSeries { values: p, labels };
        write_series(&mut w, &series, !a.no_labels)?;
    } else {
        let cfg = MixtureConfig {
            pi: a.pi,
            reference: parse_reference(&a.reference)?,
            anomaly_shift: a.shift,
            length: a.length,
            seed: g.seed,
        };
        write_series(&mut w, &generate_mixture(&cfg)?, !a.no_labels)?;
    }
    w.flush()?;
    Ok(())
}

fn read_input(path: &Option<PathBuf>) -> CliResult<(Vec<f64>, Option<Vec<bool>>)> {
    let reader: Box<dyn Read> = match path {
        Some(p) if p != Path::new("-") => {
            Box::new(BufReader::new(File::open(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?))
        }
        _ => Box::new(io::stdin().lock()),
    };
    let (values, labels) = read_series(reader).map_err(|e| match path {
        Some(p) => Failure::Usage(format!("{}: {e}", p.display())),
        None => Failure::Usage(format!("stdin: {e}")),
    })?;
    Ok((values, labels))
}

fn parse_level(name: &str, s: &str) -> CliResult<Level> {
    s.parse().map_err(|e: Error| Failure::Usage(format!("--{name}: {e}")))
}

fn build_score(a: &DetectArgs) -> CliResult<ScoreFunction> {
    let train = match &a.train {
        Some(p) => Some(read_input(&Some(p.clone()))?.0),
        None => None,
    };
    let need_train = |what: &str| -> CliResult<Vec<f64>> {
        train.clone().ok_or_else(|| Failure::Usage(format!("--score {what} needs --train")))
    };
    let s = a.score.trim().to_ascii_lowercase();
    Ok(match s.split_once(':') {
        None if s == "identity" => ScoreFunction::Identity,
        None if s == "zscore" => fit_zscore(&need_train("zscore")?)?,
        Some(("knn", k)) => {
            let k: usize = k.parse().map_err(|_| Failure::Usage(format!("bad k in '{s}'")))?;
            ScoreFunction::knn(k, need_train("knn")?)?
        }
        Some(("kde", h)) => {
            let h: f64 = h.parse().map_err(|_| Failure::Usage(format!("bad bandwidth in '{s}'")))?;
            ScoreFunction::kde(h, need_train("kde")?)?
        }
        _ => return fail(format!("unknown score '{s}' (identity, zscore, knn:<k>, kde:<h>)")),
    })
}

fn detector_config(a: &DetectArgs) -> CliResult<DetectorConfig> {
    let alpha = parse_level("alpha", &a.alpha)?;
    let policy = match a.policy.to_ascii_lowercase().as_str() {
        "bh" => ThresholdPolicy::Bh { alpha },
        "mbh" => ThresholdPolicy::Mbh { alpha, pi_hat: parse_level("pi", &a.pi)? },
        "lord3" | "lord" => ThresholdPolicy::Lord3(LordParams::new(alpha)),
        other => return fail(format!("unknown policy '{other}' (bh, mbh, lord3)")),
    };
    let windowing = match a.windowing.to_ascii_lowercase().as_str() {
        "overlapping" => Windowing::Overlapping,
        "disjoint" => Windowing::Disjoint,
        other => return fail(format!("unknown windowing '{other}' (overlapping, disjoint)")),
    };
    let pv = a.pvalue.to_ascii_lowercase();
    let pvalue = match pv.as_str() {
        "empirical" => PValueKind::Empirical,
        "conformal" => PValueKind::Conformal,
        "precomputed" => PValueKind::Precomputed,
        other => match other.strip_prefix("oracle-").or_else(|| other.strip_prefix("oracle:")) {
            Some(r) => PValueKind::Oracle(parse_reference(r)?),
            None if other == "oracle" => PValueKind::Oracle(Reference::GaussianStd),
            None => return fail(format!("unknown p-value kind '{other}'")),
        },
    };
    let strategy = match a.calibration.to_ascii_lowercase().as_str() {
        "fixed" => Strategy::Fixed,
        "sliding" => Strategy::SlidingEstimated,
        "sliding-oracle" => Strategy::SlidingOracle,
        other => return fail(format!("unknown calibration strategy '{other}' (fixed, sliding, sliding-oracle)")),
    };
    if a.window == 0 {
        return fail("--window must be >= 1");
    }
    let n = match a.n {
        Some(n) => n,
        None => {
            if a.ell == 0 {
                return fail("--ell must be >= 1");
            }
            let level = policy.effective_alpha(a.window)?;
            if level.is_zero() {
                return fail("alpha must be > 0");
            }
            calibration_cardinality(a.window, level, a.ell) as usize
        }
    };
    Ok(DetectorConfig { window: a.window, windowing, policy, pvalue, strategy, n, score: build_score(a)?, force_n: a.force_n })
}

fn cmd_detect(a: &DetectArgs) -> CliResult<()> {
    let cfg = detector_config(a)?;
    if matches!(cfg.policy, ThresholdPolicy::Lord3(_)) && cfg.pvalue == PValueKind::Conformal {
        eprintln!(
            "warning: LORD3 on conformal p-values has weak power; conformal p-values never fall below 1/(n+1) = {:.3e}",
            1.0 / (cfg.n as f64 + 1.0)
        );
    }
    let (values, labels) = read_input(&a.input)?;
    let records = run_stream(&values, labels.as_deref(), &cfg)?;
    let mut w = output_writer(&a.output)?;
    write_records(&mut w, &records)?;
    w.flush()?;
    if a.summary {
        if labels.is_some() {
            let c = counts_from_records(&records, false)?;
            eprintln!("summary: decided={} rejections={} false_positives={} anomalies={}", c.nulls + c.anomalies, c.rejections, c.false_positives, c.anomalies);
            eprintln!("FDP={:.6}", fdp(&c));
            eprintln!("FNP={:.6}", fnp(&c));
        } else {
            eprintln!("note: input has no labels; no summary");
        }
    }
    Ok(())
}

fn cmd_experiment(a: &ExperimentArgs, g: &Globals) -> CliResult<()> {
    let name: ExperimentName = a.name.parse()?;
    let mut params = Params::new();
    for (s, k, v) in &g.file.sections {
        if s == name.as_str() {
            params.set(k, v);
        }
    }
    for pair in &a.set {
        params.set_pair(pair)?;
    }
    if let Some(r) = a.replications {
        params.set("replications", &r.to_string());
    }
    let spec = ExperimentSpec { name, params, seed: g.seed, quick: g.quick };
    let out = experiments::run_experiment(&spec)?;
    let files = experiments::write_output(&out, &g.out, g.plot)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    for c in &out.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if a.check && !out.all_passed() {
        return Err(Failure::Check);
    }
    Ok(())
}

fn cmd_list() {
    for e in ExperimentName::ALL {
        println!("{:<18} {}", e.as_str(), e.description());
    }
}

fn cmd_show_config(name: &Option<String>, g: &Globals) -> CliResult<()> {
    let names: Vec<ExperimentName> = match name {
        Some(n) => vec![n.parse()?],
        None => ExperimentName::ALL.to_vec(),
    };
    println!("seed = {}", g.seed);
    println!("quick = {}", g.quick);
    println!("plot = {}", g.plot);
    println!("out = {}", g.out.display());
    for e in names {
        println!();
        println!("[{}]", e.as_str());
        for (k, v) in experiments::defaults(e, g.quick)? {
            println!("{k} = {v}");
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let g = globals(&cli)?;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &g),
        Command::Detect(a) => cmd_detect(a),
        Command::Experiment(a) => cmd_experiment(a, &g),
        Command::List => {
            cmd_list();
            Ok(())
        }
        Command::ShowConfig { name } => cmd_show_config(name, &g),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Check) => {
            eprintln!("error: one or more checks failed");
            ExitCode::from(2)
        }
    }
}
