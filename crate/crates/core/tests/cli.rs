use std::path::Path;
use std::process::{Command, Output};

fn rtg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtg"))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_metrics_bounds_prune() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    let out = rtg(&[
        "build",
        "--depth",
        "2",
        "--width",
        "4",
        "--seed",
        "1",
        "--points",
        "2500",
        "--out",
        path(&graph),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = rtg(&["metrics", "--graph", path(&graph)]);
    assert!(out.status.success());
    let m = json(&out);
    assert!(m["node_count"].as_u64().unwrap() >= 2);
    assert!(m["node_count"].as_u64().unwrap() < 53);

    let out = rtg(&["bounds", "--graph", path(&graph)]);
    assert_eq!(out.status.code(), Some(0));
    let reports = json(&out);
    assert_eq!(reports.as_array().unwrap().len(), 5);
    assert_eq!(reports[0]["theoretical_value"], 53);

    let out = rtg(&[
        "prune",
        "--graph",
        path(&graph),
        "--fraction",
        "0.5",
        "--points",
        "2500",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let c = json(&out);
    assert!(c["sup_error"].as_f64().unwrap().is_finite());

    // Wrong grid size is caught rather than silently mismatched.
    let out = rtg(&["prune", "--graph", path(&graph), "--points", "100"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn explicit_spec_must_match_graph() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    assert!(rtg(&[
        "build",
        "--depth",
        "2",
        "--width",
        "4",
        "--points",
        "400",
        "--out",
        path(&graph)
    ])
    .status
    .success());
    let out = rtg(&["bounds", "--graph", path(&graph), "--depth", "3", "--width", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_graph_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("bad.json");
    std::fs::write(&graph, "{\"format_version\": 1, \"m\": 4").unwrap();
    let out = rtg(&["metrics", "--graph", path(&graph)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parsing"));
}

#[test]
fn oracle_matches_for_three_lines() {
    let out = rtg(&["oracle", "--lines", "3", "--seed", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["comparison"]["oracle_cells"], 7);
    assert_eq!(v["comparison"]["nodes_match"], true);
}

#[test]
fn small_sweep_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    std::fs::write(
        &config,
        "depths = [2]\nwidths = [4, 8]\nseeds = 2\ngrid_target = 900\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = rtg(&[
        "--threads",
        "2",
        "sweep",
        "--config",
        path(&config),
        "--out-dir",
        path(&out_dir),
        "--save-graphs",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    // Header, 2 configs x (2 seeds + agg).
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("depth,width,seed,node_count"));
    assert_eq!(std::fs::read_dir(out_dir.join("graphs")).unwrap().count(), 4);

    std::fs::write(&config, "depths = [2]\nbogus = 1\n").unwrap();
    let out = rtg(&["sweep", "--config", path(&config), "--out-dir", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
}
