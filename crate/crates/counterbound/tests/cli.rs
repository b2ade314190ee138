//! End-to-end runs of the binary over the fixture set: exit codes, JSON
//! shapes against the shipped schemas, format round trips.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_counterbound"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(format!("{}/fixtures/{}", env!("CARGO_MANIFEST_DIR"), name))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn json_of(out: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout_str(out)).expect("one JSON document on stdout")
}

/// Minimal structural validation against the shipped tree schemas:
/// required keys, value kinds, recursive children.
fn check_flow_node(v: &serde_json::Value) {
    let obj = v.as_object().expect("node is an object");
    assert!(obj["sym"].is_string());
    for key in ["in", "out"] {
        let x = &obj[key];
        assert!(
            x.is_u64() || x == "-inf",
            "{} must be a natural or \"-inf\", got {}",
            key,
            x
        );
    }
    for c in obj["children"].as_array().expect("children array") {
        check_flow_node(c);
    }
}

fn check_parse_node(v: &serde_json::Value) {
    let obj = v.as_object().expect("node is an object");
    assert!(obj["sym"].is_string());
    assert!(!obj.contains_key("in"));
    for c in obj["children"].as_array().expect("children array") {
        check_parse_node(c);
    }
}

#[test]
fn decide_g1_json_unbounded() {
    let out = run(&[
        "decide",
        fixture("g1.gvas").to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    assert_eq!(doc["verdict"], "unbounded");
    check_flow_node(&doc["certificate"]["tree"]);
    assert!(doc["certificate"]["s"].is_array());
    assert!(doc["certificate"]["t"].is_array());
}

#[test]
fn decide_decreasing_bounded() {
    let out = run(&[
        "decide",
        fixture("decreasing.gvas").to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    assert_eq!(doc["verdict"], "bounded");
    assert_eq!(doc["proof"], "oracle-closure");
    let set: Vec<u64> = doc["reach_set"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(set, vec![0, 1, 2, 3, 4, 5]);
}

#[test]
fn reduce_fig1_then_decide_matches_simulator() {
    let reduced = run(&["reduce", fixture("fig1.pvas").to_str().unwrap()]);
    assert_eq!(reduced.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig1_reduced.gvas");
    std::fs::write(&path, stdout_str(&reduced)).unwrap();
    let out = run(&[
        "decide",
        path.to_str().unwrap(),
        "--oracle-max",
        "256",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    assert_eq!(doc["verdict"], "bounded");
    let reach: Vec<u64> = doc["reach_set"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    // simulator counter values for x = 2
    let sim = run(&[
        "simulate",
        fixture("fig1.pvas").to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(sim.status.code(), Some(0));
    let sim_doc = json_of(&sim);
    assert_eq!(sim_doc["truncated"]["max_counter"], false);
    assert_eq!(
        sim_doc["max_counters"][0].as_u64().unwrap(),
        *reach.last().unwrap()
    );
}

#[test]
fn verify_fig2_fixture_ok_and_dot() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("fig2.dot");
    let out = run(&[
        "verify",
        "--grammar",
        fixture("ackermann_m1.gvas").to_str().unwrap(),
        "--flow-tree",
        fixture("fig2_left.json").to_str().unwrap(),
        "--dot",
        dot.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["ok"], true);
    let rendered = std::fs::read_to_string(&dot).unwrap();
    assert!(rendered.starts_with("digraph"));
}

#[test]
fn verify_tampered_certificate_fails_with_violations() {
    // take the certificate decide produces for G1, then break an
    // inequality
    let out = run(&[
        "decide",
        fixture("g1.gvas").to_str().unwrap(),
        "--json",
    ]);
    let doc = json_of(&out);
    let mut cert = doc["certificate"].clone();
    let norm_text = doc["normalized"].as_str().unwrap().to_string();
    cert["tree"]["children"][0]["out"] = serde_json::json!(9);
    let dir = tempfile::tempdir().unwrap();
    let gpath = dir.path().join("g1_norm.gvas");
    std::fs::write(&gpath, norm_text).unwrap();
    let cpath = dir.path().join("bad.json");
    std::fs::write(&cpath, serde_json::to_string(&cert).unwrap()).unwrap();
    let out = run(&[
        "verify",
        "--grammar",
        gpath.to_str().unwrap(),
        "--certificate",
        cpath.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json_of(&out);
    assert_eq!(doc["ok"], false);
    assert!(!doc["violations"].as_array().unwrap().is_empty());
}

#[test]
fn rank_subcommand_fig2() {
    let out = run(&[
        "rank",
        "--grammar",
        fixture("ackermann_m1.gvas").to_str().unwrap(),
        "--flow-tree",
        fixture("fig2_left.json").to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    assert_eq!(doc["finite_count"], 12);
    assert_eq!(doc["value_sum"], 53);
}

#[test]
fn oracle_subcommand_ackermann() {
    let out = run(&[
        "oracle",
        fixture("ackermann_m1.gvas").to_str().unwrap(),
        "--max",
        "64",
        "--start",
        "X1",
        "--input-value",
        "5",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    assert_eq!(doc["closed"], true);
    assert_eq!(doc["max"], 7);
}

#[test]
fn oracle_capped_exits_inconclusive() {
    let out = run(&[
        "oracle",
        fixture("g1.gvas").to_str().unwrap(),
        "--max",
        "10",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let doc = json_of(&out);
    assert_eq!(doc["closed"], false);
    assert_eq!(doc["capped_at"], 10);
}

#[test]
fn simulate_ackermann_pvas_values() {
    for (fix, expected_max) in [("ack_pvas_m0.pvas", 2u64), ("ack_pvas_m1.pvas", 3u64)] {
        let out = run(&["simulate", fixture(fix).to_str().unwrap(), "--json"]);
        assert_eq!(out.status.code(), Some(0), "{}", fix);
        let doc = json_of(&out);
        assert_eq!(doc["max_counters"][0].as_u64().unwrap(), expected_max);
    }
}

#[test]
fn pump_and_witness_json_shapes() {
    let out = run(&["pump", fixture("g1.gvas").to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    assert_eq!(doc["pump_sum"], 1);
    check_parse_node(&doc["pump_tree"]);
    check_parse_node(&doc["context_tree"]);

    let out = run(&["pump", fixture("decreasing.gvas").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&[
        "witness",
        fixture("ackermann_m2.gvas").to_str().unwrap(),
        "--starts",
        "X1,X0",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    assert_eq!(doc["total_sum"], 3); // δ(X1) + δ(X0) = 2 + 1
    for t in doc["trees"].as_array().unwrap() {
        check_parse_node(t);
    }
}

#[test]
fn normalize_round_trip_and_idempotence() {
    let out = run(&["normalize", fixture("ackermann_m2.gvas").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("norm.gvas");
    std::fs::write(&path, &text).unwrap();
    let again = run(&["normalize", path.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    // already-normalized input is reproduced verbatim
    assert_eq!(stdout_str(&again), text);
}

#[test]
fn malformed_input_exits_3_with_line_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.gvas");
    std::fs::write(&path, "gvas\ncounter_init nope\n").unwrap();
    let out = run(&["decide", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "stderr: {}", err);
}

#[test]
fn prefix_closure_diagnostic_warns_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("open.gvas");
    // 1 1 is in the language, the prefix 1 is not
    std::fs::write(&path, "gvas\ncounter_init 0\nstart S\nS -> U U\nS ->\nU -> 1\n").unwrap();
    let out = run(&[
        "decide",
        path.to_str().unwrap(),
        "--check-prefix-closed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not prefix-closed"), "stderr: {}", err);
}

#[test]
fn gen_is_deterministic_and_parseable() {
    let a = run(&["gen", "gvas", "--seed", "7"]);
    let b = run(&["gen", "gvas", "--seed", "7"]);
    assert_eq!(stdout_str(&a), stdout_str(&b));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.gvas");
    std::fs::write(&path, stdout_str(&a)).unwrap();
    let parsed = run(&["normalize", path.to_str().unwrap()]);
    assert_eq!(parsed.status.code(), Some(0));

    let p = run(&["gen", "pvas", "--seed", "3"]);
    let q = run(&["gen", "pvas", "--seed", "3"]);
    assert_eq!(stdout_str(&p), stdout_str(&q));
    let path = dir.path().join("gen.pvas");
    std::fs::write(&path, stdout_str(&p)).unwrap();
    let sim = run(&["simulate", path.to_str().unwrap(), "--max-configs", "2000"]);
    assert!(matches!(sim.status.code(), Some(0) | Some(2)));
}

#[test]
fn displacement_text_output() {
    let out = run(&["displacement", fixture("ackermann_m2.gvas").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    assert!(text.contains("X0: 1"));
    assert!(text.contains("X1: 2"));
    assert!(text.contains("X2: +inf"));
}

#[test]
fn schema_files_are_valid_json() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas");
    for name in ["tree.schema.json", "flowtree.schema.json", "certificate.schema.json"] {
        let text = std::fs::read_to_string(dir.join(name)).expect("schema shipped");
        let _: serde_json::Value = serde_json::from_str(&text).expect("valid JSON");
    }
}
