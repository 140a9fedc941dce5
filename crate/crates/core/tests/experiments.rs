use std::fs;
use std::path::Path;

use iontomo::experiments::{cmd_dist, cmd_ensemble, cmd_povm_dump, cmd_sweep, ExperimentConfig};
use iontomo::Error;

const FIG1: &str = r#"
seed = 11

[physics]
t = 1.0
lambda = 0.05
lambda_b = 3.0
lambda_d = 0.05

[model]
kind = "photon_count"

[run]
shots = 1000000
ensemble = 50
"#;

fn body(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

fn column(path: &Path, idx: usize) -> Vec<f64> {
    body(path)[1..].iter().map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn dist_outputs_are_normalized_and_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(FIG1).unwrap();
    let files = cmd_dist(&cfg, dir.path()).unwrap();
    assert_eq!(files, ["bright.csv", "dark.csv", "decay.csv", "errors_vs_threshold.csv"]);
    for f in ["bright.csv", "dark.csv", "decay.csv"] {
        let total: f64 = column(&dir.path().join(f), 1).iter().sum();
        assert!((total - 1.0).abs() < 1e-10, "{f}: {total}");
    }
    let scan = dir.path().join("errors_vs_threshold.csv");
    let (e10, e01) = (column(&scan, 1), column(&scan, 2));
    assert!(e10.windows(2).all(|w| w[1] >= w[0]));
    assert!(e01.windows(2).all(|w| w[1] <= w[0]));
    let header = fs::read_to_string(dir.path().join("dark.csv")).unwrap();
    assert!(header.contains("# resolved.k0 = 1"));
    assert!(header.contains("# resolved.n_ph = 22"));

    let no_decay = ExperimentConfig::from_toml(&FIG1.replace("lambda = 0.05", "lambda = 0.0")).unwrap();
    cmd_dist(&no_decay, dir.path()).unwrap();
    assert_eq!(body(&dir.path().join("decay.csv")), ["k,probability", "0,1.00000000000000000e0"]);
}

#[test]
fn ensemble_reruns_are_byte_identical() {
    let cfg = ExperimentConfig::from_toml(&FIG1.replace("ensemble = 50", "ensemble = 8\nsimulate = true")).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = cmd_ensemble(&cfg, a.path(), false).unwrap();
    let second = cmd_ensemble(&cfg, b.path(), false).unwrap();
    assert_eq!(first, second);
    assert!(first.mean_infidelity.is_some());
    for f in ["ensemble.csv", "summary.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let mut other = cfg.clone();
    other.seed += 1;
    let third = cmd_ensemble(&other, b.path(), false).unwrap();
    assert_ne!(first.mean_loss, third.mean_loss);
}

#[test]
fn standard_error_shrinks_with_ensemble_size() {
    let dir = tempfile::tempdir().unwrap();
    let small = ExperimentConfig::from_toml(FIG1).unwrap();
    let large = ExperimentConfig::from_toml(&FIG1.replace("ensemble = 50", "ensemble = 200")).unwrap();
    let se_small = cmd_ensemble(&small, dir.path(), false).unwrap().stderr_loss;
    let se_large = cmd_ensemble(&large, dir.path(), false).unwrap().stderr_loss;
    let ratio = se_small / se_large;
    assert!((ratio / 2.0 - 1.0).abs() <= 0.3, "SE ratio {ratio}, expected about 2");
}

#[test]
fn check_mode_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let ok = ExperimentConfig::from_toml(&format!("{FIG1}\n[check.photon_count]\ntarget = 5.507\ntolerance = 0.2\n")).unwrap();
    cmd_ensemble(&ok, dir.path(), true).unwrap();
    let bad = ExperimentConfig::from_toml(&format!("{FIG1}\n[check.photon_count]\ntarget = 4.0\ntolerance = 0.1\n")).unwrap();
    assert!(cmd_ensemble(&bad, dir.path(), false).is_ok());
    assert!(matches!(cmd_ensemble(&bad, dir.path(), true), Err(Error::CheckViolation(_))));
}

#[test]
fn sweep_records_reading_and_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let text = FIG1.replace("ensemble = 50", "ensemble = 20") + "\n[sweep]\naxis = \"time\"\ngrid = [0.5, 2.0, 8.0]\n";
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let report = cmd_sweep(&cfg, dir.path(), false).unwrap();
    assert_eq!(report.points.len(), 3);
    assert_eq!(report.minimum(iontomo::ModelKind::PhotonCount).value, 2.0);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.contains("resolved.axis_reading = rates lambda, lambda_b, lambda_d fixed"));
    assert_eq!(body(&dir.path().join("minimum.csv")).len(), 3);
    let missing = ExperimentConfig::from_toml(FIG1).unwrap();
    assert!(matches!(cmd_sweep(&missing, dir.path(), false), Err(Error::Config(_))));
}

#[test]
fn povm_dump_counts_operators() {
    let dir = tempfile::tempdir().unwrap();
    let text = FIG1.replace("lambda = 0.05", "lambda = 0.0").replace("lambda_d = 0.05", "lambda_d = 0.0");
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    cmd_povm_dump(&cfg, dir.path()).unwrap();
    let counts = body(&dir.path().join("operator_counts.csv"));
    let fields: Vec<&str> = counts[1].split(',').collect();
    let n_ph: usize = fields[3].parse::<f64>().unwrap().sqrt() as usize - 1;
    assert_eq!(fields[4].parse::<usize>().unwrap(), (n_ph + 1).pow(2) * 9);
    let th = ExperimentConfig::from_toml(&text.replace("photon_count", "threshold")).unwrap();
    cmd_povm_dump(&th, dir.path()).unwrap();
    assert_eq!(body(&dir.path().join("operator_counts.csv"))[1].split(',').nth(4), Some("36"));
}
