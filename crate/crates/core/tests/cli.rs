use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_manet-track"))
}

#[test]
fn invalid_config_prints_error_json_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"nodes_per_cluster": 0}"#).unwrap();
    let out = bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "invalid_config");
    assert!(err["message"].as_str().unwrap().contains("nodes_per_cluster"));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = bin().args(["run", "--config", "/nonexistent/cfg.json"]).output().unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "io");
}

#[test]
fn elect_writes_epoch_zero_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["elect", "--small", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("elections.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let epochs: Vec<String> = rows.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert!(!epochs.is_empty());
    assert!(epochs.iter().all(|e| e == "0"));
}

#[test]
fn localize_solves_a_fixes_file() {
    let dir = tempfile::tempdir().unwrap();
    let fixes = dir.path().join("fixes.json");
    let d = 50f64.hypot(50.0);
    std::fs::write(
        &fixes,
        format!(
            r#"{{"method": "triangulation", "fixes": [
                {{"position": {{"x": 0, "y": 0}}, "distance": {d}}},
                {{"position": {{"x": 100, "y": 0}}, "distance": {d}}},
                {{"position": {{"x": 0, "y": 100}}, "distance": {d}}}]}}"#
        ),
    )
    .unwrap();
    let out = bin().arg("localize").arg("--fixes").arg(&fixes).arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("estimate.json")).unwrap()).unwrap();
    assert!((est["position"]["x"].as_f64().unwrap() - 50.0).abs() < 1e-6);
    assert!((est["position"]["y"].as_f64().unwrap() - 50.0).abs() < 1e-6);
}

#[test]
fn track_replays_a_csv_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let mut text = String::from("t,x,y\n");
    for i in 0..20 {
        text.push_str(&format!("{i},{},{}\n", 5.0 * i as f64, 2.0 * i as f64));
    }
    std::fs::write(&path, text).unwrap();
    let out = bin().arg("track").arg("--trajectory").arg(&path).arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = std::fs::read_to_string(dir.path().join("track.csv")).unwrap();
    assert_eq!(rows.lines().count(), 21);
}

#[test]
fn compare_writes_summary_per_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["compare", "--trajectories", "3", "--format", "ndjson", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("compare_summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 3);
    assert!(dir.path().join("compare.ndjson").exists());
}
