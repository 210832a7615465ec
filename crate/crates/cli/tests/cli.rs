use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_online-fdr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path, labels: bool) -> String {
    let path = dir.join(if labels { "labeled.csv" } else { "plain.csv" });
    let p = path.to_str().unwrap();
    let mut args = vec!["--seed", "5", "simulate", "--pi", "0.01", "--shift", "4", "--length", "4000", "-o", p];
    if !labels {
        args.push("--no-labels");
    }
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    p.to_string()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["experiment", "NoSuchExperiment"]).status.code(), Some(1));
    let o = run(&["experiment", "HeuristicTable", "--set", "bogus=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn inadmissible_calibration_size_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), true);
    let o = run(&["detect", &input, "--policy", "bh", "--n", "1000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not of the form"), "{}", stderr(&o));
    let o = run(&["detect", &input, "--policy", "bh", "--n", "1000", "--force-n", "-o", "/dev/null"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn detect_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), true);
    let out = dir.path().join("records.csv");
    let o = run(&["detect", &input, "--summary", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("FDP="));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 4001);
}

#[test]
fn summary_on_unlabeled_input_is_a_note() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), false);
    let o = run(&["detect", &input, "--summary", "-o", "/dev/null"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!stderr(&o).contains("FDP="));
}

#[test]
fn lord3_with_conformal_warns() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), true);
    let o = run(&["detect", &input, "--policy", "lord3", "--pvalue", "conformal", "--n", "999", "-o", "/dev/null"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn list_and_show_config() {
    let o = run(&["list"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for name in ["FdrVsN", "CompareLord", "OverlapTables", "IntermediateDrops"] {
        assert!(s.contains(name), "{s}");
    }
    let o = run(&["show-config", "HeuristicTable"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("[HeuristicTable]") && s.contains("replications = 1000"), "{s}");
}

#[test]
fn experiment_checks_drive_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["--out", out, "experiment", "HeuristicTable", "--set", "alphas=0.1", "--replications", "200", "--check"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS"));
    assert!(dir.path().join("HeuristicTable/results.csv").exists());
    assert!(dir.path().join("HeuristicTable/heuristic_summary.csv").exists());

    // cumulative FDP at t=2000 rarely lands in the narrow band
    let o = run(&[
        "--out", out, "experiment", "Convergence", "--set", "alphas=0.05", "--set", "pis=0.02", "--set", "length=2000",
        "--replications", "20", "--check",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn experiment_output_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        let o = run(&[
            "--seed", "9", "--jobs", jobs, "--out", dir.path().to_str().unwrap(), "--plot", "experiment", "MfdrAtypicity",
            "--set", "deltas=1,100", "--replications", "10",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["results.csv", "summary.csv", "plot.svg"] {
        let x = std::fs::read(a.path().join("MfdrAtypicity").join(f)).unwrap();
        let y = std::fs::read(b.path().join("MfdrAtypicity").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn config_file_sets_experiment_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    std::fs::write(&cfg, "seed = 3\nquick = true\n\n[HeuristicTable]\nalphas = 0.2\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "show-config", "HeuristicTable"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("seed = 3") && s.contains("replications = 100"), "{s}");
}
