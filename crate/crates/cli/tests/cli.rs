use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const ONE11: &str = r#"{"activation":"elu","layers":[{"rows":1,"cols":1,"entries":[[0,0,1.0]]},{"rows":1,"cols":1,"entries":[[0,0,1.0]]}]}"#;

// W1 = [[1,-2],[3,4]], W2 = [[1,1]].
const SMALL: &str = r#"{"activation":"softplus","layers":[
  {"rows":2,"cols":2,"entries":[[0,0,1],[0,1,-2],[1,0,3],[1,1,4]]},
  {"rows":1,"cols":2,"entries":[[0,0,1],[0,1,1]]}]}"#;

fn lipopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lipopt")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: stdout {:?} stderr {:?}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

#[test]
fn bound_golden_report() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "one11.json", ONE11);
    let out = lipopt(&["bound", "--net", s(&net), "--k", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let mut v = json(&out);
    assert!(v["seconds"].as_f64().unwrap() >= 0.0);
    v.as_object_mut().unwrap().remove("seconds");
    let golden: Value = serde_json::from_str(
        r#"{"theta":1.0,"k":2,"mode":"sparse","terms":15,"rows":6,"rip":true,"status":"optimal"}"#,
    )
    .unwrap();
    assert_eq!(v, golden);

    let raw = String::from_utf8(out.stdout).unwrap();
    assert!(raw.starts_with(r#"{"theta":1.0,"k":2,"mode":"sparse","terms":15,"rows":6,"rip":true,"status":"optimal","seconds":"#));
    assert!(raw.ends_with("}\n"));
}

#[test]
fn bound_below_depth_is_infeasible() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "one11.json", ONE11);
    let out = lipopt(&["bound", "--net", s(&net), "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["theta"], "inf");
    assert_eq!(v["status"], "infeasible");
}

#[test]
fn term_cap_exits_three() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "one11.json", ONE11);
    let out = lipopt(&["bound", "--net", s(&net), "--k", "2", "--max-terms", "3"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("term cap"));

    let out = Command::new(env!("CARGO_BIN_EXE_lipopt"))
        .args(["bound", "--net", s(&net), "--k", "2"])
        .env("LIPOPT_MAX_TERMS", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn baselines() {
    let dir = TempDir::new().unwrap();
    let small = write(&dir, "small.json", SMALL);
    let v = json(&lipopt(&["baseline", "ubp", "--net", s(&small)]));
    assert_eq!(v["method"], "ubp");
    assert_eq!(v["value"], 14.0);

    let one = write(&dir, "one11.json", ONE11);
    let v = json(&lipopt(&["baseline", "oracle", "--net", s(&one)]));
    assert_eq!(v["value"], 1.0);
    assert_eq!(v["vertices"], 4);

    let out = lipopt(&["baseline", "lbs", "--net", s(&small)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["samples"], 50000);
    assert!(v["value"].as_f64().unwrap() <= 14.0);
}

#[test]
fn oracle_cap_exits_three() {
    let dir = TempDir::new().unwrap();
    let small = write(&dir, "small.json", SMALL);
    let out = lipopt(&["baseline", "oracle", "--net", s(&small), "--vertex-cap", "2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn multi_output_restriction() {
    let dir = TempDir::new().unwrap();
    let two = write(
        &dir,
        "two.json",
        r#"{"activation":"elu","layers":[{"rows":1,"cols":1,"entries":[[0,0,1.0]]},{"rows":2,"cols":1,"entries":[[0,0,1.0],[1,0,-3.0]]}]}"#,
    );
    assert_eq!(lipopt(&["baseline", "ubp", "--net", s(&two)]).status.code(), Some(1));
    let v = json(&lipopt(&["baseline", "ubp", "--net", s(&two), "--output-index", "1"]));
    assert_eq!(v["value"], 3.0);
}

#[test]
fn generate_prune_and_bound() {
    let dir = TempDir::new().unwrap();
    let net = dir.path().join("net.json");
    let out = lipopt(&["gen-random", "--widths", "4,4,1", "--sparsity", "2", "--seed", "5", "--out", s(&net)]);
    assert_eq!(out.status.code(), Some(0));
    let again = lipopt(&["gen-random", "--widths", "4,4,1", "--sparsity", "2", "--seed", "5"]);
    assert_eq!(fs::read(&net).unwrap(), again.stdout);

    let pruned = dir.path().join("pruned.json");
    assert_eq!(lipopt(&["prune", "--net", s(&net), "--fraction", "0.25", "--out", s(&pruned)]).status.code(), Some(0));
    let text = fs::read_to_string(&pruned).unwrap();
    let entries: usize = serde_json::from_str::<Value>(&text).unwrap()["layers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["entries"].as_array().unwrap().len())
        .sum();
    // Ten weights at r = 2; a quarter rounds down to two.
    assert_eq!(entries, 8);

    let theta = json(&lipopt(&["bound", "--net", s(&net), "--k", "2"]))["theta"].as_f64().unwrap();
    let ubp = json(&lipopt(&["baseline", "ubp", "--net", s(&net)]))["value"].as_f64().unwrap();
    let lbs = json(&lipopt(&["baseline", "lbs", "--net", s(&net), "--samples", "2000"]))["value"].as_f64().unwrap();
    assert!(lbs <= theta + 1e-9 && theta <= ubp + 1e-9, "{lbs} {theta} {ubp}");
}

#[test]
fn local_bound_not_above_global() {
    let dir = TempDir::new().unwrap();
    let net = dir.path().join("net.json");
    lipopt(&["gen-random", "--widths", "3,3,1", "--seed", "2", "--out", s(&net)]);
    let x0 = write(&dir, "x0.json", "[0.5, -0.5, 0.25]");
    let out = lipopt(&["bound", "--net", s(&net), "--k", "2", "--local", s(&x0), "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let local = json(&out)["theta"].as_f64().unwrap();
    let global = json(&lipopt(&["bound", "--net", s(&net), "--k", "2"]))["theta"].as_f64().unwrap();
    assert!(local <= global + 1e-9, "{local} > {global}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("global theta"));

    let keyed = write(&dir, "x0k.json", r#"{"x0": [0.5, -0.5, 0.25]}"#);
    let v = json(&lipopt(&["bound", "--net", s(&net), "--k", "2", "--local", s(&keyed), "--eps", "0.1"]));
    assert_eq!(v["theta"].as_f64().unwrap(), local);

    let bad = lipopt(&["bound", "--net", s(&net), "--k", "2", "--local", s(&x0), "--eps=-1"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn sweep_shape_and_determinism() {
    let args = [
        "sweep", "--widths", "5,5,1", "--sparsity", "2,3,full", "--k", "2,3", "--seeds", "3", "--samples", "500",
        "--no-timing",
    ];
    let a = lipopt(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, lipopt(&args).stdout);

    let text = String::from_utf8(a.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "widths,sparsity,seed,lbs,theta_2,relerr_2,theta_3,relerr_3,ubp,sandwich,error"
    );
    assert_eq!(lines.len(), 1 + 3 * 3);
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 11, "{line}");
        assert_eq!(cols[9], "true", "{line}");
        assert_eq!(cols[10], "");
    }
    assert!(lines[1].starts_with("5-5-1,2,0,"));
    assert!(lines[9].starts_with("5-5-1,full,2,"));
}

#[test]
fn sweep_records_cell_failures() {
    let out = lipopt(&[
        "sweep", "--widths", "3,3,1", "--sparsity", "2,5", "--k", "2", "--seeds", "1", "--samples", "10", "--oracle",
        "22",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let width = lines[0].split(',').count();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with("true,"));
    assert!(lines[2].contains("sparsity 5 exceeds"), "{}", lines[2]);
    assert_eq!(lines[2].split(',').count(), width);
}

#[test]
fn exports() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "one11.json", ONE11);
    let golden = include_str!("../../core/tests/golden/one11_k2.mps");
    let out = lipopt(&["export", "mps", "--net", s(&net), "--k", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden);
    assert_eq!(lipopt(&["export", "mps", "--net", s(&net)]).status.code(), Some(1));

    let out = lipopt(&["export", "sdpa", "--net", s(&net)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('*')).collect();
    let m: usize = body[0].parse().unwrap();
    assert_eq!(body[1], "2");
    assert_eq!(body[2].split_whitespace().count(), 2);
    assert_eq!(body[3].split_whitespace().count(), m);
}

#[test]
fn validate_pattern_reports() {
    let dir = TempDir::new().unwrap();
    let small = write(&dir, "small.json", SMALL);
    let v = json(&lipopt(&["validate-pattern", "--net", s(&small)]));
    assert_eq!(v["valid"], true);
    assert_eq!(v["cliques"], serde_json::json!([[0, 1, 2], [0, 1, 3]]));
    // C(8, 2) per clique.
    assert_eq!(v["term_bound"], "56");

    let bad = write(&dir, "bad.json", r#"{"cliques": [[0, 2], [1, 3]]}"#);
    let v = json(&lipopt(&["validate-pattern", "--net", s(&small), "--pattern", s(&bad)]));
    assert_eq!(v["valid"], false);
    assert_eq!(v["decomposes"], false);

    let oob = write(&dir, "oob.json", r#"{"cliques": [[0, 9]]}"#);
    assert_eq!(lipopt(&["validate-pattern", "--net", s(&small), "--pattern", s(&oob)]).status.code(), Some(1));
}
