use online_fdr::detector::{run_stream, DetectorConfig, Detector};
use online_fdr::experiments::{run_experiment, write_output, ExperimentName, ExperimentSpec};
use online_fdr::generator::{generate_mixture, MixtureConfig, Reference};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn csv_bytes(spec: &ExperimentSpec, threads: usize) -> Vec<(String, Vec<u8>)> {
    let out = in_pool(threads, || run_experiment(spec).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let mut files: Vec<(String, Vec<u8>)> = write_output(&out, dir.path(), true)
        .unwrap()
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn experiments_do_not_depend_on_thread_count() {
    let specs = [
        ExperimentSpec::new(ExperimentName::FdrVsN, 3).set("n_values", "99,100").set("deltas", "3").set("replications", "300"),
        ExperimentSpec::new(ExperimentName::CompareLord, 4)
            .set("deltas", "4")
            .set("alphas", "0.2")
            .set("length", "2000")
            .set("replications", "4"),
        ExperimentSpec::new(ExperimentName::HeuristicTable, 5).set("alphas", "0.2").set("replications", "50"),
    ];
    for spec in &specs {
        let a = csv_bytes(spec, 1);
        let b = csv_bytes(spec, 3);
        assert_eq!(a.len(), b.len());
        for ((fa, xa), (fb, xb)) in a.iter().zip(&b) {
            assert_eq!(fa, fb);
            assert!(xa == xb, "{} {fa} differs between thread counts", spec.name);
        }
    }
}

#[test]
fn seeds_change_results() {
    let spec = |seed| ExperimentSpec::new(ExperimentName::HeuristicTable, seed).set("alphas", "0.2").set("replications", "50");
    let a = run_experiment(&spec(1)).unwrap();
    let b = run_experiment(&spec(2)).unwrap();
    assert_ne!(a.results.to_csv_string(), b.results.to_csv_string());
}

#[test]
fn push_api_matches_run_stream() {
    let series = generate_mixture(&MixtureConfig {
        pi: 0.02,
        reference: Reference::GaussianStd,
        anomaly_shift: 3.5,
        length: 6000,
        seed: 17,
    })
    .unwrap();
    let cfg = DetectorConfig::default();
    let batch = run_stream(&series.values, Some(&series.labels), &cfg).unwrap();
    let mut det = Detector::new(cfg).unwrap();
    let mut pushed = Vec::new();
    for (x, l) in series.values.iter().zip(&series.labels) {
        det.push(*x, Some(*l), &mut pushed).unwrap();
    }
    det.finish(&mut pushed);
    assert_eq!(batch, pushed);
}
