//! Black-box tests of the `agc` binary: exit codes, file outputs, CSV
//! schema, and determinism, on a two-subsystem instance small enough to
//! solve in milliseconds.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn agc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agc"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("agc-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Two scalar subsystems, chain dynamics, self-loop-only information:
/// subsystem 2 observes only itself but is driven by subsystem 1, so its
/// own state is information-coupling.
fn tiny_problem(dir: &Path) -> PathBuf {
    let text = r#"{
        "subsystems": {"nx": [1, 1], "nu": [1, 1]},
        "horizon": 2,
        "A": [[0.5, 0.0], [0.4, 0.3]],
        "B": [[1.0, 0.0], [0.0, 1.0]],
        "sigma": "identity",
        "distribution": "uniform",
        "constraints": {"state_inf_bound": 1.5, "input_inf_bound": 2.0},
        "cost": {"state_weights": [1.0, 1.0], "input_weights": [0.5, 0.5]},
        "information_graph": [[1, 1], [2, 2]]
    }"#;
    let path = dir.join("tiny.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn analyze_reports_coupling() {
    let dir = tmp_dir("analyze");
    let problem = tiny_problem(&dir);
    let out = run(agc().args([
        "analyze",
        "--problem",
        problem.to_str().unwrap(),
        "--patterns",
        "--dot",
        dir.join("gc.dot").to_str().unwrap(),
    ]));
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("nonclassical"), "stdout: {stdout}");
    assert!(stdout.contains("C = {2}"), "stdout: {stdout}");
    let dot = std::fs::read_to_string(dir.join("gc.dot")).unwrap();
    assert!(dot.contains("digraph"));
    assert!(dot.contains("2 -> 2"));
}

#[test]
fn synthesize_simulate_roundtrip() {
    let dir = tmp_dir("synth");
    let problem = tiny_problem(&dir);
    let sol_path = dir.join("solution.json");
    let out = run(agc().args([
        "synthesize",
        "--problem",
        problem.to_str().unwrap(),
        "--out",
        sol_path.to_str().unwrap(),
    ]));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let sol: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&sol_path).unwrap()).unwrap();
    assert_eq!(sol["status"], "optimal");
    assert!(sol["objective"].as_f64().unwrap() > 0.0);
    assert!(sol["variables"]["Q_w"]["value"]["rows"].as_u64().unwrap() == 4);
    assert!(sol["policy"]["lambda"].as_f64().unwrap() >= 1.0);

    let report_path = dir.join("report.json");
    let csv_path = dir.join("samples.csv");
    let out = run(agc().args([
        "simulate",
        "--solution",
        sol_path.to_str().unwrap(),
        "--samples",
        "400",
        "--seed",
        "7",
        "--out",
        report_path.to_str().unwrap(),
        "--csv",
        csv_path.to_str().unwrap(),
    ]));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert!(report["max_constraint_residual"].as_f64().unwrap() <= 1e-6);
    assert!(report["max_contract_membership"].as_f64().unwrap() <= 1.0 + 1e-6);
    assert!(report["worst_case_margin"].as_f64().unwrap() <= 1e-7);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("sample,constraint_residual,contract_membership\n"));
    assert_eq!(csv.lines().count(), 401);
}

#[test]
fn synthesize_infeasible_exit_code() {
    let dir = tmp_dir("infeas");
    let problem = tiny_problem(&dir);
    let out = run(agc().args([
        "synthesize",
        "--problem",
        problem.to_str().unwrap(),
        "--xmax",
        "0.3",
        "--out",
        dir.join("sol.json").to_str().unwrap(),
    ]));
    assert_eq!(out.status.code(), Some(1));
    let sol: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("sol.json")).unwrap()).unwrap();
    assert_eq!(sol["status"], "infeasible");
    assert!(sol.get("policy").is_none() || sol["policy"].is_null());
}

#[test]
fn usage_error_exit_code() {
    let out = run(agc().args(["synthesize", "--no-such-flag"]));
    assert_eq!(out.status.code(), Some(2));
    let out = run(agc().args(["analyze", "--problem", "/nonexistent/problem.json"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_csv_schema_and_determinism() {
    let dir = tmp_dir("sweep");
    let problem = tiny_problem(&dir);
    let run_sweep = |out_dir: &Path| {
        let out = run(agc().args([
            "sweep",
            "--problem",
            problem.to_str().unwrap(),
            "--graph",
            "tiny",
            "--start",
            "0.8",
            "--stop",
            "1.6",
            "--count",
            "3",
            "--samples",
            "60",
            "--seed",
            "11",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]));
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap()
    };
    let csv1 = run_sweep(&dir.join("a"));
    let csv2 = run_sweep(&dir.join("b"));
    // Bit-identical output modulo the wall-clock column.
    let strip_time = |csv: &str| -> String {
        csv.lines()
            .map(|line| {
                let mut cols: Vec<&str> = line.split(',').collect();
                if cols.len() > 4 {
                    cols[4] = "-";
                }
                cols.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        strip_time(&csv1),
        strip_time(&csv2),
        "identical seeds must give identical results"
    );

    let mut lines = csv1.lines();
    assert_eq!(
        lines.next().unwrap(),
        "x_max,graph,status,objective,solve_time_s,max_constraint_margin,max_contract_membership,mc_cost_mean,mc_cost_stderr"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for (row, expect_x) in rows.iter().zip([0.8, 1.2, 1.6]) {
        let x: f64 = row.split(',').next().unwrap().parse().unwrap();
        assert!((x - expect_x).abs() < 1e-12, "row {row}");
        assert!(row.contains(",tiny,"));
    }
    // Cost curves exist alongside.
    assert!(dir.join("a").join("cost_curves.svg").exists());
    // Solution files only for feasible points.
    let solutions: Vec<_> = std::fs::read_dir(dir.join("a"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("solution_"))
        .collect();
    let feasible_rows = rows.iter().filter(|r| r.contains(",optimal,")).count();
    assert_eq!(solutions.len(), feasible_rows);
}

#[test]
fn determinism_includes_solver_output_rounding() {
    // The CSV must round-trip bit-identically under --round as well.
    let dir = tmp_dir("round");
    let problem = tiny_problem(&dir);
    let out = run(agc().args([
        "sweep",
        "--problem",
        problem.to_str().unwrap(),
        "--start",
        "1.0",
        "--stop",
        "1.5",
        "--count",
        "2",
        "--samples",
        "30",
        "--round",
        "12",
        "--out-dir",
        dir.join("r").to_str().unwrap(),
    ]));
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("r").join("sweep.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let obj = line.split(',').nth(3).unwrap();
        if !obj.is_empty() {
            assert!(obj.contains('e'), "rounded output uses scientific form: {obj}");
        }
    }
}
