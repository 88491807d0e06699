use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qnn_core::experiments::two_neuron;
use qnn_core::lattice::LatticeConfig;

const FAST: [&str; 10] = [
    "--thermalization",
    "20000",
    "--sweeps",
    "200",
    "--interval",
    "5",
    "--levels",
    "3",
    "--seed",
    "7",
];

fn qnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnn")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_network(dir: &Path) -> String {
    let cfg = LatticeConfig::default().with_slices(64);
    let net = two_neuron(cfg, 3000.0).unwrap();
    let path = dir.join("net.json");
    fs::write(&path, net.to_json().unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn write_weights(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("w.csv");
    let mut text = (0..10).map(|d| format!("digit_{d}")).collect::<Vec<_>>().join(",");
    text.push('\n');
    for i in 0..784 {
        let row: Vec<String> = (0..10).map(|j| format!("{}", ((i * 7 + j * 3) % 11) as f64 / 10.0)).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn kink_check_passes_at_defaults() {
    let o = qnn(&["kink-check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("66.666667"));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn coarser_lattice_has_larger_error() {
    let error_of = |n: &str| -> f64 {
        let o = qnn(&["kink-check", "--n-slices", n]);
        let out = stdout(&o);
        let line = out.lines().find(|l| l.starts_with("relative error")).unwrap();
        line.split_whitespace().last().unwrap().parse().unwrap()
    };
    assert!(error_of("64") > error_of("512"));
}

#[test]
fn analytic_action_scales_with_lambda() {
    let o = qnn(&["kink-check", "--lambda", "2"]);
    assert!(stdout(&o).contains("1.333333"), "{}", stdout(&o));
}

#[test]
fn malformed_network_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{ not json").unwrap();
    let o = qnn(&["simulate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error"));
}

#[test]
fn missing_network_file_is_a_usage_error() {
    let o = qnn(&["simulate", "/nonexistent/net.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seeded_simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let net = small_network(dir.path());
    let mut args = vec!["simulate", net.as_str()];
    args.extend(FAST);
    let a = qnn(&args);
    let b = qnn(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    let csv = stdout(&a);
    assert!(csv.starts_with("neuron_id,activity,std_error,n_samples\n"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn simulate_writes_file_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let net = small_network(dir.path());
    let out = dir.path().join("act.csv");
    let mut args = vec!["simulate", net.as_str(), "--out", out.to_str().unwrap()];
    args.extend(FAST);
    let o = qnn(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(fs::read_to_string(&out).unwrap().starts_with("neuron_id"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("act.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["command"], "simulate");
    assert!(manifest["inputs"][0].as_str().unwrap().ends_with("net.json"));
}

#[test]
fn unknown_scheme_and_empty_range_are_usage_errors() {
    let o = qnn(&["sweep", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("chain3"));
    let o = qnn(&["sweep", "chain3", "--k", "2:1:0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qnn(&["sweep", "chain3", "--k", "0:1:0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_csv_manifest_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let plot = dir.path().join("plot.py");
    let mut args = vec![
        "sweep",
        "two_neuron",
        "--k",
        "0:0.5:0.25",
        "--n-slices",
        "64",
        "--out",
        out.to_str().unwrap(),
        "--plot-script",
        plot.to_str().unwrap(),
    ];
    args.extend(FAST);
    let o = qnn(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    let ks: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["0", "0.25", "0.5"]);
    assert!(dir.path().join("sweep.csv.manifest.json").exists());
    assert!(fs::read_to_string(&plot).unwrap().contains("sweep.csv"));
}

#[test]
fn missing_mnist_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = qnn(&["train", "--mnist-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(dir.path().to_str().unwrap()), "{}", stderr(&o));
}

#[test]
fn blank_image_scores_are_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let weights = write_weights(dir.path());
    let image = dir.path().join("blank.txt");
    fs::write(&image, vec!["0"; 784].join(" ")).unwrap();
    let mut args = vec![
        "recognize",
        "--weights",
        weights.to_str().unwrap(),
        "--image",
        image.to_str().unwrap(),
        "--n-slices",
        "64",
    ];
    args.extend(FAST);
    let o = qnn(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let scores: Vec<f64> = out
        .lines()
        .skip(1)
        .take(10)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(scores.len(), 10);
    assert!((scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(scores.iter().all(|s| (s - 0.1).abs() < 0.01), "{scores:?}");
    assert!(out.contains("predicted"));
}

#[test]
fn bad_image_size_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let image = dir.path().join("short.txt");
    fs::write(&image, "0 0 0").unwrap();
    let weights = write_weights(dir.path());
    let o = qnn(&["recognize", "--weights", weights.to_str().unwrap(), "--image", image.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
