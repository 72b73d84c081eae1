use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "graph_id,m,n,fusion_type,strategy,p,mfpt,n_states,n_initial_fusions,seed,error";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fusionnet")).args(args).output().expect("spawn cli")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_path5(dir: &Path) -> String {
    let path = dir.join("path5.json");
    std::fs::write(&path, r#"{"vertices":[0,1,2,3,4],"edges":[[0,1],[1,2],[2,3],[3,4]]}"#).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn gen_graph_is_reproducible() {
    let a = ok(&["gen-graph", "--m", "6", "--n", "10", "--seed", "3"]);
    let b = ok(&["gen-graph", "--m", "6", "--n", "10", "--seed", "3"]);
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["vertices"].as_array().unwrap().len(), 6);
    assert_eq!(v["edges"].as_array().unwrap().len(), 10);
}

#[test]
fn gen_graph_rejects_impossible_sizes() {
    assert!(!run(&["gen-graph", "--m", "4", "--n", "9"]).status.success());
}

#[test]
fn analyze_single_fusion() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("p3.json");
    std::fs::write(&g, r#"{"vertices":[0,1,2],"edges":[[0,1],[1,2]]}"#).unwrap();
    let out = ok(&["analyze", "--graph", g.to_str().unwrap(), "--prob", "0.5"]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some(HEADER));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[3], "t1");
    assert_eq!(row[4], "s1");
    assert_eq!(row[6].parse::<f64>().unwrap(), 2.0);
    assert_eq!(row[7], "2");
}

#[test]
fn analyze_json_and_chain_dump() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_path5(dir.path());
    let chain = dir.path().join("chain.json");
    let out = ok(&[
        "analyze",
        "--graph",
        &g,
        "--fusion-type",
        "t2",
        "--strategy",
        "s2",
        "--prob",
        "0.75",
        "--dump-chain",
        chain.to_str().unwrap(),
        "--json",
    ]);
    let rows: serde_json::Value = serde_json::from_str(&out).unwrap();
    let r = &rows[0];
    assert_eq!(r["fusion_type"], "t2");
    assert_eq!(r["strategy"], "s2");
    let dumped: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&chain).unwrap()).unwrap();
    assert_eq!(dumped["states"].as_array().unwrap().len() as u64, r["n_states"].as_u64().unwrap());
}

#[test]
fn baseline_spot_value() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_path5(dir.path());
    let out = ok(&["baseline", "--graph", &g, "--prob", "0.5", "--json"]);
    let rows: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(rows[0]["k"], 3);
    assert_eq!(rows[0]["mfpt"].as_f64().unwrap(), 14.0);
}

#[test]
fn montecarlo_reports_z_score() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_path5(dir.path());
    let out = ok(&["montecarlo", "--graph", &g, "--trials", "2000", "--seed", "4", "--json"]);
    let rows: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(rows[0]["trials"], 2000);
    assert!(rows[0]["z_score"].as_f64().unwrap().abs() < 5.0);
}

#[test]
fn sweep_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    ok(&[
        "sweep",
        "--m",
        "4",
        "--n",
        "4,5",
        "--graphs",
        "2",
        "--probs",
        "0.5,0.85",
        "--fusion-types",
        "t1",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    // 2 edge counts x 2 graphs x 5 methods x 2 probabilities
    assert_eq!(lines.count(), 40);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_path5(dir.path());
    for args in [
        vec!["analyze", "--graph", "/nonexistent.json"],
        vec!["analyze", "--graph", g.as_str(), "--prob", "1.5"],
        vec!["analyze", "--graph", g.as_str(), "--strategy", "s9"],
        vec!["sweep", "--probs", "0"],
    ] {
        let out = run(&args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}
