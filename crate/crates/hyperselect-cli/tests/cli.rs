use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hyperselect::data::load_dataset;
use hyperselect::harness::read_csv;

const SMALL: &[&str] = &["--n", "20", "--m-train", "12", "--m-val", "6", "--m-test", "6"];

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hyperselect"));
    c.env_remove("HYPERSELECT_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn config(args: &[&str]) -> serde_json::Value {
    let out = run(&with(args, &["--print-config"]).iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn generate_defaults_have_published_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let st = run(&["generate", "--out", out.to_str().unwrap()]);
    assert!(st.status.success());
    let ds = load_dataset(&out).unwrap();
    assert_eq!((ds.train.a.nrows(), ds.val.a.nrows(), ds.test.a.nrows()), (200, 20, 100));
    assert_eq!(ds.n_features(), 500);
}

#[test]
fn generate_noiseless_targets_are_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let args = with(&["generate", "--noise-level", "0", "--out", out.to_str().unwrap()], SMALL);
    assert!(bin().args(&args).output().unwrap().status.success());
    let ds = load_dataset(&out).unwrap();
    let truth = ds.ground_truth.as_ref().unwrap();
    for split in [&ds.train, &ds.val, &ds.test] {
        assert_eq!(split.a.dot(truth), split.b);
    }
}

#[test]
fn generate_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let args = with(&["generate", "--seed", seed, "--out", out.to_str().unwrap()], SMALL);
        assert!(bin().args(&args).output().unwrap().status.success());
        ["train.csv", "val.csv", "test.csv", "truth.csv", "meta.json"].map(|f| fs::read(out.join(f)).unwrap())
    };
    assert_eq!(gen("a", "3"), gen("b", "3"));
    assert_ne!(gen("c", "4")[0], gen("a", "3")[0]);
}

#[test]
fn run_elastic_net_defaults_and_twenty_records() {
    let c = config(&["run", "--method", "admm_bda", "--model", "en"]);
    let solver = &c["solver"];
    assert_eq!(solver["scaling"]["sigma"], 1e-4);
    assert_eq!(solver["scaling"]["zeta"], 5e-10);
    assert_eq!(solver["scaling"]["eta"], 1e-10);
    assert_eq!(solver["s"], 1.0);
    assert_eq!(solver["mu"], 0.7);
    assert_eq!(solver["alpha"], 1e-3);
    assert_eq!(c["reps"], 20);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = with(&["run", "--method", "admm_bda", "--model", "en", "--max-outer", "3", "--budget", "30", "--out", out], SMALL);
    let o = bin().args(&args).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line = String::from_utf8(o.stdout).unwrap();
    assert!(line.starts_with("admm_bda ") && line.matches('±').count() == 3, "{line}");
    let recs = read_csv(fs::File::open(dir.path().join("admm_bda.csv")).unwrap()).unwrap();
    assert_eq!(recs.len(), 20);
    assert!(rows(&dir.path().join("admm_bda_trajectory.csv")) > 1);
    assert!(rows(&dir.path().join("admm_bda_iterates.csv")) > 20);
}

#[test]
fn pgm_with_generalized_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let o = run(&["run", "--method", "pgm_bda", "--model", "gen", "--q", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn bad_flag_combinations_are_usage_errors() {
    for args in [
        &["run", "--method", "grid", "--model", "gen"][..],
        &["run", "--method", "grid", "--model", "en", "--q", "2"],
        &["run", "--method", "nope", "--model", "en"],
        &["run", "--method", "grid", "--preset", "en-synth", "--model", "gen", "--q", "1"],
        &["run", "--method", "grid", "--model", "en", "--libsvm", "x.txt"],
        &["run", "--method", "grid"],
        &["run", "--method", "grid", "--model", "en", "--reps", "0"],
    ] {
        assert_eq!(run(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn generalized_qinf_defaults_to_smaller_sigma() {
    let c = config(&["run", "--method", "grid", "--model", "gen", "--q", "inf"]);
    assert_eq!(c["solver"]["scaling"]["sigma"], 1e-5);
    assert_eq!(c["noise"], "un");
    let c = config(&["run", "--method", "grid", "--model", "gen", "--q", "1"]);
    assert_eq!(c["solver"]["scaling"]["sigma"], 1e-4);
    assert_eq!(c["noise"], "ln");
}

#[test]
fn presets_and_overrides_resolve() {
    let c = config(&["run", "--method", "admm_bda", "--preset", "en-real", "--libsvm", "f.txt", "--split", "200,26,26"]);
    assert_eq!(c["preset"], "en-real");
    assert_eq!(c["solver"]["scaling"]["sigma"], 1e-5);
    assert_eq!(c["solver"]["s"], 1e-2);
    assert_eq!(c["solver"]["mu"], 0.9);
    assert_eq!(c["noise"], "real");
    let c = config(&["run", "--method", "admm_bda", "--model", "en", "--mu", "0.3", "--lambda0", "0.1,0.2"]);
    assert_eq!(c["solver"]["mu"], 0.3);
    assert_eq!(c["solver"]["lambda0"]["lambda1"], 0.1);
}

#[test]
fn benchmark_rows_and_shared_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("en");
    let args = with(
        &["benchmark", "--model", "en", "--reps", "2", "--max-outer", "3", "--budget", "30", "--grid", "2,2", "--random-points", "3"],
        SMALL,
    );
    let o = bin().args(&args).args(["--out", out.to_str().unwrap()]).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let recs = read_csv(fs::File::open(out.join("benchmark.csv")).unwrap()).unwrap();
    let mut methods: Vec<&str> = recs.iter().map(|r| r.method.as_str()).collect();
    methods.sort();
    methods.dedup();
    assert_eq!(methods, ["admm_bda", "grid", "pgm_bda", "random"]);
    assert_eq!(recs.len(), 8);
    for m in methods {
        assert!(out.join(format!("trajectory_{m}.csv")).exists());
    }
    let datasets = fs::read_to_string(out.join("datasets.csv")).unwrap();
    let lines: Vec<&str> = datasets.lines().collect();
    assert_eq!(lines[0], "seed,sha256");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,") && lines[1].len() == 2 + 64);

    let out = dir.path().join("gen");
    let args = with(
        &["benchmark", "--model", "gen", "--q", "2", "--reps", "1", "--max-outer", "2", "--budget", "20", "--grid", "2,1", "--random-points", "2"],
        SMALL,
    );
    let o = bin().args(&args).args(["--out", out.to_str().unwrap()]).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let recs = read_csv(fs::File::open(out.join("benchmark.csv")).unwrap()).unwrap();
    assert!(recs.iter().all(|r| r.method != "pgm_bda"));
    assert_eq!(recs.len(), 3);
    assert!(!out.join("trajectory_pgm_bda.csv").exists());
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let args = with(
        &["run", "--method", "admm_bda", "--model", "en", "--reps", "2", "--max-outer", "3", "--budget", "20"],
        SMALL,
    );
    let o = bin()
        .args(&args)
        .args(["--step-policy", "override", "--s", "1e300", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    let args = with(&["benchmark", "--model", "en", "--methods", "admm_bda", "--reps", "1", "--max-outer", "2", "--budget", "20"], SMALL);
    let o = bin()
        .args(&args)
        .args(["--step-policy", "override", "--s", "1e300", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn missing_input_is_an_io_error() {
    let o = run(&["run", "--method", "grid", "--model", "en", "--data", "/definitely/not/here"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/definitely/not/here"));
}

#[test]
fn output_directory_defaults_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = bin().env("HYPERSELECT_OUT", &target).args(["generate", "--n", "10", "--m-train", "5", "--m-val", "3", "--m-test", "3"]).output().unwrap();
    assert!(o.status.success());
    assert!(target.join("train.csv").exists());
}
