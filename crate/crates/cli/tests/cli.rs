use std::path::Path;
use std::process::{Command, Output};

use dicke_cli::output::SolveDocument;
use dicke_core::{oracle, solve, DickeLadder, Method};

fn dicke(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dicke"))
        .args(args)
        .env_remove("DICKE_PRECISION_CAP")
        .output()
        .expect("binary runs")
}

fn read_doc(path: &Path) -> SolveDocument {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn csv_header_and_layout() {
    let out = dicke(&[
        "solve", "--n", "4", "--gamma", "1", "--t-max", "3", "--points", "300", "--method", "residue", "--out", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,rho_0,rho_1,rho_2,rho_3,rho_4,rate");
    assert_eq!(lines.len(), 301);
    let last: Vec<f64> = lines[300].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(last.len(), 7);
    assert_eq!(last[0], 3.0);
    let sum: f64 = last[1..6].iter().sum();
    assert!((sum - 1.0).abs() < 1e-12);
}

#[test]
fn digits_flag_controls_significant_digits() {
    let out = dicke(&["solve", "--n", "2", "--points", "2", "--digits", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let field = text.lines().nth(2).unwrap().split(',').nth(1).unwrap();
    let mantissa = field.split('e').next().unwrap();
    assert_eq!(mantissa.replace(['.', '-'], "").len(), 5);
}

#[test]
fn monte_carlo_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let s = p.to_str().unwrap();
        let out = dicke(&[
            "solve", "--n", "6", "--points", "20", "--method", "mc", "--ntraj", "100000", "--seed", "42", "--file", s,
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn general_initial_state_matches_ode() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = dicke(&[
        "solve",
        "--n",
        "4",
        "--initial",
        "2",
        "--t-max",
        "3",
        "--points",
        "50",
        "--out",
        "json",
        "--file",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let doc = read_doc(&path);
    assert_eq!(doc.populations[0], vec![0.0, 0.0, 1.0, 0.0, 0.0]);
    let ladder = DickeLadder::new(4, 1.0).unwrap();
    let ode =
        oracle::integrate_rate_equations(&ladder, 2, &doc.grid, oracle::OdeTolerances::new(1e-12, 1e-14)).unwrap();
    for (row, reference) in doc.populations.iter().zip(&ode.populations) {
        for (a, b) in row.iter().zip(reference) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn json_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = dicke(&[
        "solve",
        "--n",
        "12",
        "--points",
        "40",
        "--method",
        "jordan",
        "--out",
        "json",
        "--file",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let doc = read_doc(&path);
    assert_eq!(doc.schema, 1);
    assert_eq!(doc.metadata.method, Method::Jordan);
    assert!(doc.metadata.mantissa_bits >= 53);
    let ladder = DickeLadder::new(12, 1.0).unwrap();
    let table = solve(&ladder, 12, &doc.config.grid(), Method::Jordan, &doc.config.solver).unwrap();
    assert_eq!(doc.grid, table.times);
    assert_eq!(doc.populations, table.populations);
    let reparsed: SolveDocument = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
    assert_eq!(reparsed, doc);
}

#[test]
fn json_carries_every_tolerance() {
    let out = dicke(&["solve", "--n", "5", "--points", "5", "--out", "json", "--rtol", "1e-9"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["schema", "config", "grid", "populations", "rate", "errors", "metadata"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let tol = &v["metadata"]["tolerances"];
    assert_eq!(tol["ode_rel_tol"], 1e-9);
    assert!(tol["precision_target"].is_number());
    assert!(tol["precision_cap_bits"].is_number());
}

#[test]
fn precision_cap_env_var_is_the_default() {
    let out = Command::new(env!("CARGO_BIN_EXE_dicke"))
        .args(["solve", "--n", "5", "--points", "5", "--out", "json"])
        .env("DICKE_PRECISION_CAP", "512")
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["precision"]["cap_bits"], 512);

    let starved = Command::new(env!("CARGO_BIN_EXE_dicke"))
        .args(["solve", "--n", "200", "--points", "5"])
        .env("DICKE_PRECISION_CAP", "53")
        .output()
        .unwrap();
    assert_eq!(starved.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&starved.stderr).unwrap();
    assert_eq!(err["error"]["exit_code"], 3);
}

#[test]
fn compare_exact_methods_agree() {
    let out = dicke(&["compare", "--n", "6", "--methods", "residue,jordan,ode", "--points", "60"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let pairs = v["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 3);
    for p in pairs {
        assert!(p["max_abs"].as_f64().unwrap() <= 1e-8);
        assert_eq!(p["per_time"].as_array().unwrap().len(), 60);
    }
}

#[test]
fn compare_monte_carlo_by_z_scores() {
    let out = dicke(&["compare", "--n", "6", "--methods", "mc,residue", "--ntraj", "100000", "--points", "20"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let z = &v["monte_carlo"][0];
    assert!(z["entries"].as_u64().unwrap() > 0);
    assert!(z["fraction_beyond_3"].as_f64().unwrap() <= 0.01);
}

#[test]
fn compare_breach_exits_four() {
    let out = dicke(&[
        "compare",
        "--n",
        "6",
        "--methods",
        "residue,ode",
        "--rtol",
        "1e-3",
        "--atol",
        "1e-3",
        "--tolerance",
        "1e-14",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "comparison_failed");
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["compare", "--n", "6", "--methods", "residue"],
        vec!["solve", "--n", "3", "--initial", "4"],
        vec!["solve", "--n", "3", "--points", "1"],
        vec!["solve", "--n", "3", "--precision", "fixed"],
        vec!["solve"],
        vec!["frobnicate"],
    ] {
        assert_eq!(dicke(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn scan_reports_exponent() {
    let out = dicke(&["scan", "--ns", "8,16,32,64,128"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let slope = v["rate_exponent"].as_f64().unwrap();
    assert!((1.8..=2.2).contains(&slope), "{slope}");
    assert_eq!(v["summaries"].as_array().unwrap().len(), 5);
}

#[test]
fn bench_reports_onset_and_escalation() {
    let out = dicke(&["bench", "--ns", "16,256", "--methods", "residue,ode", "--max-n", "256"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["double_onset_n"].as_u64().unwrap() > 1);
    assert_eq!(v["recovered"], true);
    let last = v["auto_recovery"].as_array().unwrap().last().unwrap().clone();
    assert_eq!(last["n_emitters"], 256);
    let residue_256 =
        v["timings"].as_array().unwrap().iter().find(|t| t["method"] == "residue" && t["n_emitters"] == 256).unwrap();
    assert!(residue_256["mantissa_bits"].as_u64().unwrap() > 53);
    let ode_256 =
        v["timings"].as_array().unwrap().iter().find(|t| t["method"] == "ode" && t["n_emitters"] == 256).unwrap();
    assert!(ode_256["wall_seconds"].as_f64().unwrap() < 10.0);
}

#[test]
fn trajectory_records_are_reproducible() {
    let a = dicke(&["trajectories", "--n", "5", "--records", "3", "--seed", "9"]);
    let b = dicke(&["trajectories", "--n", "5", "--records", "3", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
    assert_eq!(v[0]["jump_times"].as_array().unwrap().len(), 5);
}

#[test]
fn large_systems_default_to_log_grid() {
    let out = dicke(&["solve", "--n", "100", "--points", "10", "--out", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["grid_spacing"], "log");
}
