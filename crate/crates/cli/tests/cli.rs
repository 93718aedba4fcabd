use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use edgebatch_cli::app::load_scenario;
use edgebatch_cli::certify::{certify, CertifyOptions, Solvers};
use edgebatch_cli::solve::load_instance;
use edgebatch_cli::sweep::static_params_for;
use edgebatch_core::sim::StaticParams;
use edgebatch_core::{ComputeMode, Instance, Selection};

fn docs(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/formats").join(name)
}

fn edgebatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgebatch")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn golden_instance_schedules_two_tasks() {
    let golden = docs("instance.example.json");
    let out = edgebatch(&["solve", golden.to_str().unwrap(), "--policy", "p2-opt", "--json"]);
    assert!(out.status.success());
    let report = json(&out);
    assert_eq!(report["cardinality"], 2);
    assert_eq!(report["selected_ids"], serde_json::json!([1, 2]));
    assert!(report["nodes_visited"].as_u64().unwrap() > 0);
}

#[test]
fn text_output_lists_the_schedule() {
    let golden = docs("instance.example.json");
    let out = edgebatch(&["solve", golden.to_str().unwrap(), "--policy", "p1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    // Task 2 cannot cover f(2) = 0.2 s, so the two cheapest others win.
    assert!(text.starts_with("selected (2): [3, 4]"), "{text}");
    assert!(text.contains("nodes visited: 0"));
}

#[test]
fn without_bandwidth_matches_the_greedy_maximum() {
    let golden = docs("instance.example.json");
    let out = edgebatch(&["solve", golden.to_str().unwrap(), "--no-bandwidth", "--json"]);
    let instance = load_instance(&golden).unwrap().without_bandwidth_limit();
    assert_eq!(json(&out)["cardinality"], edgebatch_core::oracle::greedy_max_cardinality(&instance));
}

#[test]
fn empty_task_list_is_fine() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(docs("instance.example.json")).unwrap();
    let start = text.find("\"tasks\"").unwrap();
    let empty = format!("{}\"tasks\": []\n}}\n", &text[..start]);
    let path = dir.path().join("empty.json");
    std::fs::write(&path, empty).unwrap();
    let out = edgebatch(&["solve", path.to_str().unwrap(), "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["cardinality"], 0);
}

#[test]
fn schema_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(docs("instance.example.json")).unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, text.replace("\"total_bandwidth_hz\": 1000000.0", "\"total_bandwidth_hz\": -5.0")).unwrap();
    let out = edgebatch(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("total_bandwidth_hz"));
}

#[test]
fn usage_errors_exit_with_one() {
    let scenario = docs("scenario.example.json");
    let out = edgebatch(&["sweep", scenario.to_str().unwrap(), "--vary", "temperature"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(edgebatch(&["solve"]).status.code(), Some(1));
    assert_eq!(edgebatch(&["--help"]).status.code(), Some(0));
}

#[test]
fn empty_certification_passes() {
    let out = edgebatch(&["certify", "--instances", "0"]);
    assert!(out.status.success());
}

#[test]
fn certification_catches_an_injected_bug() {
    fn drops_everything(instance: &Instance) -> Selection {
        Selection::empty(instance, ComputeMode::FullNetwork)
    }
    let dir = tempfile::tempdir().unwrap();
    let solvers = Solvers { p1: drops_everything, ..Solvers::default() };
    let report = certify(&CertifyOptions { instances: 50, ..Default::default() }, &solvers, dir.path()).unwrap();
    assert!(!report.passed());
    assert_eq!(report.first_failure.as_ref().unwrap().check, "p1-optimal");
    // The reproduction file is a valid instance on which the real solver wins.
    let repro = load_instance(report.reproduction.as_ref().unwrap()).unwrap();
    assert!(!edgebatch_core::solve_p1(&repro).is_empty());
}

#[test]
fn sweep_replays_byte_identically_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    let text = std::fs::read_to_string(docs("scenario.example.json")).unwrap();
    std::fs::write(&scenario, text.replace("\"duration_s\": 60.0", "\"duration_s\": 3.0")).unwrap();
    let csv = dir.path().join("lambda.csv");
    let sweep = |workers: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_edgebatch"))
            .env("EDGEBATCH_WORKERS", workers)
            .args(["sweep", scenario.to_str().unwrap(), "--vary", "lambda", "--values", "20,80", "--seeds", "2"])
            .args(["--policies", "full_optimal,ee_optimal,static_full,single_ee", "--out", csv.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(&csv).unwrap()
    };
    let first = sweep("1");
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 1 + 2 * 4 * 2);
    assert_eq!(sweep("4"), first);
    let manifest = dir.path().join("lambda.manifest.json");
    std::fs::remove_file(&csv).unwrap();
    let out = edgebatch(&["replay", manifest.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(&csv).unwrap(), first);
    assert!(dir.path().join("lambda.summary.csv").exists());
}

#[test]
fn bench_pruning_emits_one_row_per_instance() {
    let scenario = docs("scenario.example.json");
    let out = edgebatch(&["bench-pruning", scenario.to_str().unwrap(), "--k", "6", "--d", "2,3", "--instances", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 4);
    assert!(text.starts_with("k,d,instance,max_cardinality,pruned_nodes,unpruned_nodes,ratio,capped"));
}

#[test]
fn default_static_parameters_match_the_fixture() {
    let scenario = load_scenario(&docs("scenario.example.json")).unwrap();
    let fixture: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(docs("static_params.default.json")).unwrap()).unwrap();
    for (mode, key) in [(ComputeMode::FullNetwork, "full_network"), (ComputeMode::EarlyExit, "early_exit")] {
        let expect: StaticParams = serde_json::from_value(fixture[key].clone()).unwrap();
        assert_eq!(static_params_for(&scenario, mode), expect, "{key}");
    }
}
