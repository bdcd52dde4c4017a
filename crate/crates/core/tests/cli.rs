mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ndarray::Array2;

use mvsel::cli::{ingest_csv, read_frequencies, run_select, SelectSettings, ThresholdArg, WhiteningArg};
use mvsel::rng::rng_from;
use mvsel::simulate::{ar1_rows, generate_dataset, SimulationConfig};

fn mvsel(args: &[&str], paths: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mvsel"));
    cmd.args(args);
    for (flag, p) in paths {
        cmd.arg(flag).arg(p);
    }
    cmd.output().unwrap()
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn small_dataset(dir: &Path, q: usize, seed: u64) -> std::path::PathBuf {
    let cfg = SimulationConfig {
        q,
        seed,
        kappa: 5.0,
        sparsity: 0.05,
        ..Default::default()
    };
    let d = generate_dataset(&cfg, 0).unwrap();
    let path = dir.join("data.csv");
    common::write_table(&path, d.labels.labels(), d.y.view());
    path
}

fn settings(input: &Path) -> SelectSettings {
    SelectSettings {
        input: input.to_path_buf(),
        whitening: WhiteningArg::Auto,
        lags: 10,
        resamples: 100,
        threshold: ThresholdArg::Maxpval,
        seed: 1,
        scale: false,
    }
}

#[test]
fn ingest_small_table() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    write(&p, "condition,m1,m2\nA,1,2\nA,3,4.5\nB,-1,1e-3\n");
    let d = ingest_csv(&p).unwrap();
    assert_eq!(d.labels.labels(), ["A", "A", "B"]);
    assert_eq!(d.labels.levels(), ["A", "B"]);
    assert_eq!(d.responses, ["m1", "m2"]);
    assert_eq!(d.values, ndarray::array![[1.0, 2.0], [3.0, 4.5], [-1.0, 1e-3]]);
}

#[test]
fn ingest_orders_levels_by_first_appearance() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    let mut labels = Vec::new();
    labels.extend(std::iter::repeat_n("CE".to_string(), 9));
    labels.extend(std::iter::repeat_n("CW".to_string(), 8));
    labels.extend(std::iter::repeat_n("TE".to_string(), 13));
    // Interleave so that sorting would not give the same order.
    labels.swap(0, 29);
    common::write_table(&p, &labels, Array2::<f64>::ones((30, 4)).view());
    let d = ingest_csv(&p).unwrap();
    assert_eq!(d.labels.levels(), ["TE", "CE", "CW"]);
    assert_eq!(d.labels.counts(), [13, 9, 8]);
}

#[test]
fn ingest_rejects_bad_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    let cases = [
        ("condition,a,b\nA,1,\nB,2,3\n", "missing value at row 1, column 2"),
        ("condition,a,b\nA,1,2\nB,NaN,3\n", "missing value at row 2, column 1"),
        ("condition,a,b\nA,1,2\nB,3\n", "row 2 has 2 fields, expected 3"),
        ("condition,a,b\nA,1,x\n", "non-numeric value \"x\" at row 1, column 2"),
        ("condition,a,a\nA,1,2\n", "duplicate response name \"a\""),
        ("group,a\nA,1\n", "first header field must be \"condition\""),
        ("condition,a\n", "no data rows"),
    ];
    for (text, msg) in cases {
        write(&p, text);
        let err = ingest_csv(&p).unwrap_err().to_string();
        assert!(err.contains(msg), "{text:?}: {err}");
    }
}

#[test]
fn frequencies_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_dataset(dir.path(), 40, 2);
    let out = dir.path().join("out");
    let res = run_select(&settings(&input), &out).unwrap();
    let table = read_frequencies(&out.join("frequencies.csv")).unwrap();
    assert_eq!(table.values, res.selection.stability.frequencies);
    assert_eq!(table.levels, ["L1", "L2", "L3"]);
    assert_eq!(table.responses.len(), 40);
    assert_eq!(table.responses[0], "r0");

    let support = fs::read_to_string(out.join("support.csv")).unwrap();
    let mut lines = support.lines();
    assert_eq!(lines.next(), Some("level,response,frequency"));
    assert_eq!(lines.count(), res.threshold.support.len());
    let whitening = fs::read_to_string(out.join("whitening.csv")).unwrap();
    assert_eq!(whitening.lines().count(), 4);
    assert_eq!(whitening.lines().filter(|l| l.ends_with(",true")).count(), 1);
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_dataset(dir.path(), 30, 4);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = mvsel(
        &["select", "--resamples", "200", "--threshold", "maxpval", "--seed", "9", "--scale"],
        &[("--input", &input), ("--out", &a)],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // The run record is a required argument.
    assert_eq!(mvsel(&["replay"], &[("--out", &b)]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_mvsel"))
        .arg("replay")
        .arg(a.join("run.json"))
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["whitening.csv", "frequencies.csv", "support.csv", "run.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let run: serde_json::Value = serde_json::from_slice(&fs::read(a.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["settings"]["seed"], 9);
    assert_eq!(run["settings"]["scale"], true);
    assert_eq!(run["seeds"]["root"], 9);
    assert!(run["lambda_cv"].as_f64().unwrap() > 0.0);
    assert_eq!(run["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("missing.csv");
    assert_eq!(mvsel(&["select"], &[("--input", &missing), ("--out", &out)]).status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    write(&bad, "condition,a,b\nA,1,\nB,2,3\n");
    let o = mvsel(&["select"], &[("--input", &bad), ("--out", &out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing value at row 1, column 2"));

    // Fewer responses than lags.
    let short = dir.path().join("short.csv");
    write(&short, "condition,a,b,c\nA,1,2,3\nA,2,1,0\nB,0,4,1\nB,1,1,1\n");
    let o = mvsel(&["whiten-test"], &[("--input", &short)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--H"));

    // Unknown flag values are rejected by the argument parser.
    let o = mvsel(&["select", "--whitening", "ar2"], &[("--input", &bad), ("--out", &out)]);
    assert_eq!(o.status.code(), Some(2));
}

fn noise_table(dir: &Path, phi: f64, seed: u64) -> std::path::PathBuf {
    let mut rng = rng_from(seed);
    let e = ar1_rows(30, 500, phi, 1.0, &mut rng);
    let labels: Vec<String> = (0..30).map(|i| format!("G{}", i / 10)).collect();
    let p = dir.join(format!("noise_{phi}.csv"));
    common::write_table(&p, &labels, e.view());
    p
}

#[test]
fn whiten_test_status_reports_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let white = noise_table(dir.path(), 0.0, 8);
    let o = mvsel(&["whiten-test"], &[("--input", &white)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("not rejected"));

    let ar = noise_table(dir.path(), 0.9, 8);
    let out = dir.path().join("wt");
    let o = mvsel(&["whiten-test"], &[("--input", &ar), ("--out", &out)]);
    assert_eq!(o.status.code(), Some(1));
    let table = fs::read_to_string(out.join("whitening.csv")).unwrap();
    let identity: Vec<&str> = table.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(identity[0], "identity");
    assert!(identity[3].parse::<f64>().unwrap() < 1e-6);
}

#[test]
fn simulate_and_bench_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    write(&cfg, r#"{"q": 40, "n_replicates": 2, "sparsity": 0.05, "seed": 3}"#);
    let out = dir.path().join("sim");
    let o = mvsel(&["simulate", "--resamples", "50"], &[("--config", &cfg), ("--out", &out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let outcomes = fs::read_to_string(out.join("outcomes.csv")).unwrap();
    // 2 replicates × 4 methods × 6 metrics plus the header.
    assert_eq!(outcomes.lines().count(), 1 + 2 * 4 * 6);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);

    let bcfg = dir.path().join("bench.json");
    write(&bcfg, r#"{"q_grid": [20, 40], "resample_counts": [20]}"#);
    let out = dir.path().join("bench");
    let o = mvsel(&["bench"], &[("--config", &bcfg), ("--out", &out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let timing = fs::read_to_string(out.join("timing.csv")).unwrap();
    assert_eq!(timing.lines().count(), 3);

    write(&cfg, r#"{"q": 40, "phi1": 1.5}"#);
    let o = mvsel(&["simulate"], &[("--config", &cfg), ("--out", &out)]);
    assert_eq!(o.status.code(), Some(2));
}
