use std::path::PathBuf;
use std::process::Command;

use branchflow_cli::export::{EDGE_HEADER, SAMPLE_HEADER};
use branchflow_cli::instance::{load_instance, parse_instance, save_instance};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn branchflow(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_branchflow"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = branchflow(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    serde_json::from_str(&out).unwrap()
}

#[test]
fn energy_of_single_edge_is_tau_one_times_length() {
    let v = json(&["energy", fixture("single_edge.json").to_str().unwrap()]);
    assert!((v["energy"]["total"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["kirchhoff_residual"].as_f64().unwrap(), 0.0);
}

#[test]
fn bounds_table_reproduces_scaling_sum() {
    let v = json(&[
        "bounds",
        fixture("scaling.json").to_str().unwrap(),
        "--k",
        "1",
        "--l-max",
        "4",
    ]);
    let row = v["scaling_paths"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["l"] == 4 && r["measure"] == "mu_plus")
        .unwrap();
    let closed: f64 = 2f64.sqrt() * (1..4).map(|j| 2f64.powi(j) * 2f64.powi(-2 * j).powf(0.8)).sum::<f64>();
    assert!((row["mass_bound"].as_f64().unwrap() - closed).abs() < 1e-12);
    assert!((closed - 1.9548).abs() < 1e-4);
    assert!(row["within"].as_bool().unwrap());
}

#[test]
fn export_plot_writes_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    json(&[
        "export-plot",
        fixture("merge.json").to_str().unwrap(),
        "--out-dir",
        out,
        "--frames",
        "0,3",
    ]);
    let samples = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    let lines: Vec<&str> = samples.lines().collect();
    assert_eq!(lines[0], SAMPLE_HEADER.join(","));
    assert_eq!(lines.len() - 1, 8);
    let edges = std::fs::read_to_string(dir.path().join("edges.csv")).unwrap();
    assert_eq!(edges.lines().count() - 1, 8 * 3);
    for name in ["graph.svg", "graph_t0.svg", "graph_t3.svg"] {
        let svg = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn csv_headers_are_stable() {
    assert_eq!(EDGE_HEADER.join(","), "t,edge_id,weight,tv_norm,s_tau");
    assert_eq!(
        SAMPLE_HEADER.join(","),
        "t,s_tau,tv_norm,derivative_tv,lid1,lid1_derivative"
    );
}

#[test]
fn unknown_subcommand_prints_usage_and_fails() {
    let (code, _, err) = branchflow(&["teleport"]);
    assert_ne!(code, 0);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn missing_graph_is_an_error() {
    let (code, _, err) = branchflow(&["energy", fixture("scaling.json").to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("no graph"), "{err}");
}

#[test]
fn kirchhoff_violation_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(fixture("single_edge.json")).unwrap()).unwrap();
    v["graph"]["weights"][0][2] = 0.5.into();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let (code, out, _) = branchflow(&["validate", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(out.contains("\"valid\": false"));
}

#[test]
fn optimize_emits_report_and_witness() {
    let dir = tempfile::tempdir().unwrap();
    let witness = dir.path().join("witness.json");
    let v = json(&[
        "optimize",
        fixture("merge.json").to_str().unwrap(),
        "--tau",
        "power:0.5",
        "--p",
        "2",
        "--lambda",
        "0.1",
        "--k-max",
        "3",
        "--iters",
        "200",
        "--seed",
        "7",
        "--witness",
        witness.to_str().unwrap(),
    ]);
    let lower = v["lower"].as_f64().unwrap();
    let upper = v["upper"].as_f64().unwrap();
    assert!(lower <= upper + 1e-6);
    assert_eq!(v["baseline_upper"].as_array().unwrap().len(), 3);
    let g: branchflow::graph::TransportGraph =
        serde_json::from_str(&std::fs::read_to_string(&witness).unwrap()).unwrap();
    assert!(g.is_never_cyclic());
    // same seed, same answer
    let again = json(&[
        "optimize",
        fixture("merge.json").to_str().unwrap(),
        "--k-max",
        "3",
        "--iters",
        "200",
    ]);
    assert_eq!(again["upper"], v["upper"]);
}

#[test]
fn probe_metric_over_three_instances() {
    let files: Vec<String> = (0..3)
        .map(|i| fixture(&format!("probe_{i}.json")).to_str().unwrap().to_string())
        .collect();
    let mut args = vec!["probe-metric"];
    args.extend(files.iter().map(String::as_str));
    args.extend(["--k-max", "2", "--iters", "100"]);
    let v = json(&args);
    assert_eq!(v["pairs"].as_array().unwrap().len(), 3);
    assert_eq!(v["triangles"].as_array().unwrap().len(), 3);
    assert_eq!(v["flagged_triangles"], 0);
    for b in v["identical"].as_array().unwrap() {
        assert!(b["upper"].as_f64().unwrap().abs() < 1e-12);
    }
}

#[test]
fn construct_traces_levels() {
    let v = json(&[
        "construct",
        fixture("scaling.json").to_str().unwrap(),
        "--kind",
        "band",
        "--k",
        "1",
        "--l",
        "3",
        "--trace-levels",
    ]);
    let levels = v["graph"]["levels"].as_array().unwrap();
    assert_eq!(levels.len(), v["graph"]["edges"].as_array().unwrap().len());
    assert!(v["kirchhoff_residual"].as_f64().unwrap() <= 1e-9);
    assert_eq!(v["never_cyclic"], true);
    let c = json(&[
        "construct",
        fixture("scaling.json").to_str().unwrap(),
        "--kind",
        "connector",
        "--k",
        "2",
    ]);
    assert!(c["kirchhoff_residual"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn save_then_load_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["merge.json", "far.json"] {
        let a = load_instance(&fixture(name)).unwrap();
        let path = dir.path().join(name);
        save_instance(&a, &path).unwrap();
        let b = load_instance(&path).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn weight_sum_below_one_names_the_sample() {
    let text = std::fs::read_to_string(fixture("single_edge.json")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["mu_minus"]["weights"][0][3] = 0.99.into();
    let err = parse_instance(&v.to_string()).unwrap_err().to_string();
    assert!(err.contains("t_3") && err.contains("mu_minus"), "{err}");
}
