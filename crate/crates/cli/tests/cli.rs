use std::path::Path;

use conductance_cli::{aggregate, cli_run, AggregateError};
use conductance_core::graph::{generate, Family, VertexId};
use conductance_core::sim::Outcome;
use conductance_core::tester::{run_tester, RunReport, TesterConfig};
use serde_json::Value;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["conductance"];
    argv.extend_from_slice(args);
    cli_run(argv)
}

fn run_json(args: &[&str]) -> (i32, Value) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let mut argv = args.to_vec();
    let out_str = out.display().to_string();
    argv.extend(["--out", &out_str, "--deterministic"]);
    let code = run(&argv);
    let value = std::fs::read_to_string(&out).map(|t| serde_json::from_str(&t).unwrap()).unwrap_or(Value::Null);
    (code, value)
}

#[test]
fn complete_graph_trials_report_accept_fraction() {
    let (code, report) =
        run_json(&["test", "--gen", "complete:16", "--alpha", "0.6", "--epsilon", "0.3", "--trials", "30", "--seed", "7"]);
    assert_eq!(code, 0);
    let agg = &report["result"];
    assert_eq!(agg["trials"], 30);
    let accept = agg["accept_fraction"].as_f64().unwrap();
    let total = accept + agg["reject_fraction"].as_f64().unwrap() + agg["aborted_fraction"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(agg["per_trial"][3]["seed"], 10);
    assert!(report.get("elapsed_ms").is_none());
}

#[test]
fn cheeger_on_dumbbell_passes() {
    let (code, report) = run_json(&["verify-cheeger", "--gen", "dumbbell:4"]);
    assert_eq!(code, 0);
    assert_eq!(report["pass"], true);
}

#[test]
fn oracle_modes_run() {
    let (code, report) = run_json(&["--mode", "verify-lemmas", "--gen", "dumbbell:4", "--eta", "0.25"]);
    assert_eq!(code, 0);
    assert_eq!(report["pass"], true);
    assert_eq!(report["result"]["whole_side"]["rows"].as_array().unwrap().len(), 51);
    let (code, report) = run_json(&["mixing", "--gen", "cycle:9", "--steps", "2,7"]);
    assert_eq!(code, 0);
    assert_eq!(report["result"]["reports"].as_array().unwrap().len(), 2);
    let (code, report) = run_json(&["brute-conductance", "--gen", "dumbbell:3"]);
    assert_eq!(code, 0);
    assert_eq!(report["result"]["side"], serde_json::json!([1, 2, 3]));
    assert_eq!(report["result"]["crossing_edges"], 1);
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(run(&["test", "--gen", "dumbbell:0", "--alpha", "0.5", "--epsilon", "0.1"]), 2);
    assert_eq!(run(&["test", "--gen", "nonsense:3", "--alpha", "0.5", "--epsilon", "0.1"]), 2);
    assert_eq!(run(&["test", "--gen", "complete:4"]), 2);
    assert_eq!(run(&["--gen", "complete:4"]), 2);
    assert_eq!(run(&["mixing"]), 2);
    assert_eq!(run(&["mixing", "--gen", "complete:4", "--bogus"]), 2);
    assert_eq!(run(&["test", "--gen", "complete:4", "--alpha", "0.5", "--epsilon", "0.1", "--trials", "0"]), 2);
    assert_eq!(run(&["mixing", "--gen", "complete:4", "--csv", "x.csv"]), 2);
    assert_eq!(run(&["mixing", "--graph", "/nonexistent/graph.txt"]), 2);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn validation_failures_exit_three() {
    assert_eq!(run(&["test", "--gen", "complete:4", "--alpha", "1.5", "--epsilon", "0.1"]), 3);
    assert_eq!(run(&["verify-cheeger", "--gen", "cycle:30"]), 3);
    assert_eq!(run(&["verify-lemmas", "--gen", "complete:6"]), 3);
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.txt");
    std::fs::write(&file, "3 2\n1 2\n1 2\n").unwrap();
    assert_eq!(run(&["mixing", "--graph", file.to_str().unwrap()]), 3);
}

#[test]
fn edge_list_file_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c5.txt");
    std::fs::write(&file, "# five-cycle\n5 5\n1 2\n2 3\n3 4\n4 5\n5 1\n").unwrap();
    let csv = dir.path().join("trials.csv");
    let transcript = dir.path().join("rounds.jsonl");
    let (code, report) = run_json(&[
        "test",
        "--graph",
        file.to_str().unwrap(),
        "--alpha",
        "0.5",
        "--epsilon",
        "0.5",
        "--trials",
        "3",
        "--length",
        "4",
        "--walks",
        "500",
        "--sources",
        "1,3",
        "--csv",
        csv.to_str().unwrap(),
        "--transcript",
        transcript.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(report["graph"]["n"], 5);
    assert_eq!(report["spec"]["overrides"]["walks"], 500);
    assert_eq!(report["spec"]["overrides"]["sources"], serde_json::json!([1, 3]));
    assert_eq!(report["result"]["config"]["overrides"]["ell"], 4);
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = csv_text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial,seed,outcome,sources,rejecting,first_rejecting,rounds,messages,tuples,max_edge_tuples"
    );
    assert_eq!(lines.count(), 3);
    let records: Vec<Value> =
        std::fs::read_to_string(&transcript).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 12);
    assert_eq!(records[5]["trial"], 1);
    assert_eq!(records[5]["round"], 2);
    assert!(records.iter().all(|r| r["messages"].as_u64().unwrap() <= 10));
}

#[test]
fn config_file_with_flag_override() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/dumbbell12.json");
    let (code, report) = run_json(&["--config", fixture.to_str().unwrap(), "--trials", "2"]);
    assert_eq!(code, 0);
    assert_eq!(report["spec"]["trials"], 2);
    assert_eq!(report["spec"]["overrides"]["ell"], 20);
    assert_eq!(report["spec"]["graph"]["gen"], "dumbbell:12");
    assert_eq!(run(&["--config", "/nonexistent.json"]), 2);
}

fn reports(n: usize) -> Vec<RunReport> {
    let g = generate(&Family::Cycle { n: 6 }, 0).unwrap();
    (0..n as u64)
        .map(|seed| {
            let mut c = TesterConfig::new(0.5, 0.5, seed);
            c.overrides.walks = Some(10);
            c.overrides.ell = Some(2);
            c.overrides.tau_slack = Some(100.0);
            run_tester(&g, &c).unwrap()
        })
        .collect()
}

#[test]
fn aggregate_fractions() {
    let mut rs = reports(30);
    let agg = aggregate(&rs).unwrap();
    assert_eq!(agg.accept_fraction, 1.0);
    for r in rs.iter_mut().skip(20) {
        r.outcome = Outcome::Reject;
        r.rejecting = vec![VertexId(4), VertexId(5)];
    }
    let agg = aggregate(&rs).unwrap();
    assert_eq!(agg.reject_count, 10);
    assert_eq!(agg.reject_fraction, 1.0 / 3.0);
    assert_eq!(agg.first_rejecting_histogram.get(&VertexId(4)), Some(&10));
    rs[0].outcome = Outcome::AbortedCongestion;
    let agg = aggregate(&rs).unwrap();
    assert!((agg.accept_fraction + agg.reject_fraction + agg.aborted_fraction - 1.0).abs() < 1e-15);
    assert_eq!((agg.accept_count, agg.reject_count, agg.aborted_count), (19, 10, 1));
}

#[test]
fn aggregate_is_order_independent() {
    let rs = reports(5);
    let mut reversed = rs.clone();
    reversed.reverse();
    assert_eq!(aggregate(&rs).unwrap(), aggregate(&reversed).unwrap());
}

#[test]
fn aggregate_rejects_mixed_configs() {
    let mut rs = reports(3);
    rs[2].config.alpha = 0.25;
    assert_eq!(aggregate(&rs).unwrap_err(), AggregateError::HeterogeneousConfigs { seed: 2 });
    assert_eq!(aggregate(&[]).unwrap_err(), AggregateError::Empty);
}
