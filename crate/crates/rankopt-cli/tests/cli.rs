//! End-to-end tests of the `rankopt` binary: report schema, determinism,
//! solver agreement, exit codes, and file emission.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON report")
}

fn check_schema(report: &Value, command: &str) {
    assert_eq!(report["command"], command);
    assert_eq!(report["input_digest"].as_str().unwrap().len(), 64);
    assert!(report["parameters"].is_object());
    assert!(report["result"].is_object());
    assert!(report["version"].is_string());
    assert!(report["wall_time_ms"].is_number());
}

#[test]
fn maximize_agrees_with_brute_force_on_the_bundled_example() {
    let graph = data("example8.txt");
    let graph = graph.to_str().unwrap();
    let max = report(&["maximize", "--graph", graph, "--node", "0"]);
    check_schema(&max, "maximize");
    let oracle = report(&["brute-force", "--graph", graph, "--node", "0"]);
    check_schema(&oracle, "brute-force");
    let a = max["result"]["pagerank"].as_f64().unwrap();
    let b = oracle["result"]["pagerank"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-9, "maximize {a} vs brute force {b}");
    assert_eq!(max["result"]["configuration"], oracle["result"]["configuration"]);
    assert_eq!(oracle["result"]["evaluated"], 32);
}

#[test]
fn damped_paths_agree_too() {
    let graph = data("example8.txt");
    let graph = graph.to_str().unwrap();
    let max = report(&[
        "maximize", "--graph", graph, "--node", "2", "--damping", "0.15",
    ]);
    let oracle = report(&[
        "brute-force", "--graph", graph, "--node", "2", "--damping", "0.15",
    ]);
    let a = max["result"]["pagerank"].as_f64().unwrap();
    let b = oracle["result"]["pagerank"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-9);
    let min = report(&[
        "minimize", "--graph", graph, "--node", "2", "--damping", "0.15",
    ]);
    assert!(min["result"]["pagerank"].as_f64().unwrap() <= b + 1e-12);
}

#[test]
fn maximize_without_fragile_links_equals_pagerank() {
    let dir = tempdir();
    let graph = dir.join("plain.txt");
    std::fs::write(&graph, "3\n0 1 fixed\n1 2 fixed\n2 0 fixed\n1 0 fixed\n").unwrap();
    let graph = graph.to_str().unwrap();
    let pr = report(&["pagerank", "--graph", graph, "--node", "1", "--damping", "0.15"]);
    let max = report(&[
        "maximize", "--graph", graph, "--node", "1", "--damping", "0.15",
    ]);
    let direct = pr["result"]["node_pagerank"].as_f64().unwrap();
    let optimized = max["result"]["pagerank"].as_f64().unwrap();
    assert!(
        (direct - optimized).abs() < 1e-9,
        "pagerank {direct} vs maximize {optimized}"
    );
}

#[test]
fn identical_invocations_produce_identical_payloads() {
    let graph = data("example8.txt");
    let graph = graph.to_str().unwrap();
    for args in [
        vec!["maximize", "--graph", graph, "--node", "3"],
        vec!["brute-force", "--graph", graph, "--node", "3", "--jobs", "4"],
        vec![
            "simulate", "--graph", graph, "--node", "3", "--steps", "50000", "--seed", "9",
            "--damping", "0.1",
        ],
    ] {
        let mut a = report(&args);
        let mut b = report(&args);
        a.as_object_mut().unwrap().remove("wall_time_ms");
        b.as_object_mut().unwrap().remove("wall_time_ms");
        assert_eq!(a, b, "non-deterministic payload for {args:?}");
    }
}

#[test]
fn brute_force_jobs_do_not_change_the_result() {
    let graph = data("example8.txt");
    let graph = graph.to_str().unwrap();
    let serial = report(&["brute-force", "--graph", graph, "--node", "5"]);
    let sharded = report(&["brute-force", "--graph", graph, "--node", "5", "--jobs", "3"]);
    assert_eq!(serial["result"], sharded["result"]);
}

#[test]
fn trace_and_table_files_are_written() {
    let dir = tempdir();
    let trace = dir.join("trace.jsonl");
    let table = dir.join("table.csv");
    let graph = data("example8.txt");
    let graph = graph.to_str().unwrap();
    report(&[
        "maximize", "--graph", graph, "--node", "0", "--trace", trace.to_str().unwrap(),
    ]);
    let lines: Vec<Value> = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!lines.is_empty());
    let mut last = f64::INFINITY;
    for row in &lines {
        let rt = row["return_time"].as_f64().unwrap();
        assert!(rt <= last + 1e-9);
        last = rt;
        assert!(row["hitting"].is_array());
        assert!(row["active"].is_array());
    }

    report(&[
        "brute-force", "--graph", graph, "--node", "0", "--table", table.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(&table).unwrap();
    assert!(csv.starts_with("config_bits,pagerank\n"));
    assert_eq!(csv.lines().count(), 33);
}

#[test]
fn reduce_and_emit_ssp_report_model_sizes() {
    let graph = data("example8.txt");
    let graph = graph.to_str().unwrap();
    let reduce = report(&["reduce", "--graph", graph, "--node", "0"]);
    assert_eq!(reduce["result"]["states"], 6); // d + 1
    let max = report(&["maximize", "--graph", graph, "--node", "0"]);
    let a = reduce["result"]["pagerank"].as_f64().unwrap();
    let b = max["result"]["pagerank"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-9);

    let ssp = report(&["emit-ssp", "--graph", graph, "--node", "0"]);
    assert_eq!(ssp["result"]["states"], 8 + 5 + 1);
    let damped = report(&[
        "emit-ssp", "--graph", graph, "--node", "0", "--damping", "0.15",
    ]);
    assert_eq!(damped["result"]["states"], 2 * 8 + 5 + 2);
    assert_eq!(damped["result"]["max_actions"], 2);
    assert!(damped["result"]["model"]["labels"].is_array());
}

#[test]
fn emit_lp_writes_parseable_deterministic_text() {
    let dir = tempdir();
    let out = dir.join("program.lp");
    let graph = data("example8.txt");
    let graph = graph.to_str().unwrap();
    let rep = report(&[
        "emit-lp", "--graph", graph, "--node", "0", "--variant", "undamped",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(rep["result"]["variables"], 8 + 5);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("\\ max-pagerank\nMaximize\n"));
    assert!(text.ends_with("End\n"));

    let inline = report(&["emit-lp", "--graph", graph, "--node", "0", "--variant", "undamped"]);
    assert_eq!(inline["result"]["text"].as_str().unwrap(), text);
}

#[test]
fn gadget_builds_verifies_and_round_trips_through_brute_force() {
    let dir = tempdir();
    let graph_out = dir.join("gadget.txt");
    let constraints_out = dir.join("constraints.txt");
    let cnf = data("example.cnf");
    let rep = report(&[
        "gadget",
        "--cnf",
        cnf.to_str().unwrap(),
        "--emit-graph",
        graph_out.to_str().unwrap(),
        "--emit-constraints",
        constraints_out.to_str().unwrap(),
        "--verify",
    ]);
    check_schema(&rep, "gadget");
    assert_eq!(rep["result"]["nodes"], 4);
    assert_eq!(rep["result"]["fragile"], 6);
    let verification = &rep["result"]["verification"];
    assert_eq!(verification["verdict"], "AtMost77");
    assert_eq!(verification["truth_table_satisfiable"], true);
    let best_rt = verification["best_return_time"].as_f64().unwrap();
    assert!(best_rt <= 77.0);

    // The emitted files feed straight back into the constrained oracle.
    let again = report(&[
        "brute-force",
        "--graph",
        graph_out.to_str().unwrap(),
        "--node",
        "3",
        "--damping",
        "0.005",
        "--constraints",
        constraints_out.to_str().unwrap(),
    ]);
    let pr = again["result"]["pagerank"].as_f64().unwrap();
    assert!((1.0 / pr - best_rt).abs() < 1e-9);
}

#[test]
fn every_subcommand_emits_a_schema_conforming_report() {
    let dir = tempdir();
    let graph = data("example8.txt");
    let graph = graph.to_str().unwrap();
    let cnf = data("example.cnf");
    let lp_out = dir.join("p.lp");
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("pagerank", vec!["pagerank", "--graph", graph]),
        ("maximize", vec!["maximize", "--graph", graph, "--node", "1"]),
        ("minimize", vec!["minimize", "--graph", graph, "--node", "1"]),
        ("brute-force", vec!["brute-force", "--graph", graph, "--node", "1"]),
        ("reduce", vec!["reduce", "--graph", graph, "--node", "1"]),
        ("emit-ssp", vec!["emit-ssp", "--graph", graph, "--node", "1"]),
        (
            "emit-lp",
            vec![
                "emit-lp", "--graph", graph, "--node", "1", "--variant", "undamped",
                "--out",
                lp_out.to_str().unwrap(),
            ],
        ),
        (
            "simulate",
            vec!["simulate", "--graph", graph, "--node", "1", "--steps", "1000"],
        ),
        ("gadget", vec!["gadget", "--cnf", cnf.to_str().unwrap()]),
    ];
    for (name, args) in cases {
        let rep = report(&args);
        check_schema(&rep, name);
    }
}

#[test]
fn exit_codes_follow_the_contract() {
    // Usage error: unknown flag.
    let out = run(&["maximize", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));

    // Validation error: dangling node with the error rule.
    let dir = tempdir();
    let bad = dir.join("dangling.txt");
    std::fs::write(&bad, "2\n0 1 fixed\n").unwrap();
    let out = run(&["maximize", "--graph", bad.to_str().unwrap(), "--node", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dangling"));

    // Validation error: reachability assumption violated.
    let unreachable = dir.join("unreachable.txt");
    std::fs::write(&unreachable, "3\n0 2 fixed\n1 1 fixed\n2 0 fixed\n").unwrap();
    let out = run(&[
        "maximize", "--graph", unreachable.to_str().unwrap(), "--node", "2",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Missing graph file is a validation error, not a crash.
    let out = run(&["pagerank", "--graph", "/nonexistent.txt"]);
    assert_eq!(out.status.code(), Some(2));
}

fn tempdir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "rankopt-cli-test-{}-{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap()
            .as_nanos()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
