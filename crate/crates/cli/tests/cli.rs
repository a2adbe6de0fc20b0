use std::path::Path;
use std::process::{Command, Output};

fn awi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_awi")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn uninformative_index_table_is_the_belief() {
    let out = awi(&[
        "index", "--p01", "0.3", "--p11", "0.7", "--obs", "1,1", "--throughput", "1",
        "--beta", "0.6", "--grid", "11",
    ]);
    let csv = stdout(&out);
    assert_eq!(csv.lines().next().unwrap(), "omega,index_value,kind");
    let table = rows(&csv);
    assert_eq!(table.len(), 11);
    for (i, row) in table.iter().enumerate() {
        let w = num(&row[0]);
        assert!((w - i as f64 / 10.0).abs() < 1e-15);
        assert!((num(&row[1]) - w).abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn two_point_grid_covers_the_endpoints() {
    let csv = stdout(&awi(&["index", "--system", "system-2", "--channel", "3", "--grid", "2"]));
    let table = rows(&csv);
    assert_eq!(table.len(), 2);
    assert_eq!(num(&table[0][0]), 0.0);
    assert_eq!(num(&table[1][0]), 1.0);
}

#[test]
fn iteration_gains_shrink_geometrically() {
    // max_ω |Ŵ_{n+1} − Ŵ_n| ≈ A·β^{n+1}: fit A on the first step.
    let beta = 0.2304;
    let table = |iters: u32| -> Vec<f64> {
        rows(&stdout(&awi(&[
            "index", "--system", "system-1", "--channel", "4", "--beta", "0.2304", "--iters",
            &iters.to_string(), "--grid", "101",
        ])))
        .iter()
        .map(|r| num(&r[1]))
        .collect()
    };
    let t: Vec<Vec<f64>> = (0..=4).map(table).collect();
    let gap = |i: usize, j: usize| {
        t[i].iter().zip(&t[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let a = gap(1, 0) / beta;
    let tail = gap(4, 2);
    assert!(gap(3, 2) <= a * beta.powi(3), "{} vs {}", gap(3, 2), a * beta.powi(3));
    assert!(tail <= a * beta.powi(3) / (1.0 - beta), "{tail}");
    assert!(gap(2, 0) >= tail);
}

#[test]
fn paper_bound_simulation_uses_the_system_bound() {
    let csv = stdout(&awi(&[
        "simulate", "--system", "system-1", "--seed", "3", "--runs", "20", "--horizon", "10",
    ]));
    assert_eq!(
        csv.lines().next().unwrap(),
        "system,policy,n_iter,beta,runs,horizon,mean_return,std_err,seed"
    );
    let table = rows(&csv);
    assert_eq!(table.len(), 4);
    let labels: Vec<_> = table.iter().map(|r| (r[1].as_str(), r[2].as_str())).collect();
    assert_eq!(labels, [("myopic", ""), ("awi", "0"), ("awi", "1"), ("awi", "2")]);
    for row in &table {
        assert_eq!(row[0], "system-1");
        assert!((num(&row[3]) - 0.2304).abs() < 1e-4);
        assert_eq!(row[4], "20");
        assert_eq!(row[8], "3");
    }
}

#[test]
fn single_run_output_is_reproducible() {
    let args = ["simulate", "--seed", "11", "--runs", "1", "--horizon", "20"];
    let a = stdout(&awi(&args));
    let b = stdout(&awi(&args));
    assert_eq!(a, b);
    assert!(rows(&a).iter().all(|r| num(&r[7]) == 0.0));
}

#[test]
fn crossing_suite_passes_in_full() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let status = awi(&[
        "validate", "--suite", "crossing", "--seed", "42", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    for p in report["suites"][0]["properties"].as_array().unwrap() {
        assert_eq!(p["checked"], 10_000);
        assert_eq!(p["failures"], 0);
    }
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["simulate", "--runs", "5"][..],
        &["simulate", "--seed", "1", "--system", "system-9"],
        &["index", "--system", "system-1", "--channel", "8"],
        &["index", "--p01", "0.4", "--p11", "0.4"],
        &["index", "--system", "system-1", "--channel", "1", "--grid", "1"],
        &["validate", "--suite", "nonsense"],
        &["--threads", "0", "validate", "--suite", "crossing"],
    ] {
        assert_eq!(awi(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unwritable_output_exits_with_three() {
    let out = awi(&[
        "simulate", "--seed", "1", "--runs", "2", "--horizon", "2", "--system", "system-1",
        "--out", "/nonexistent-dir/results.csv",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    std::fs::write(
        &config,
        r#"{
            "version": 1,
            "systems": [
                { "name": "pair", "channels": [
                    { "p01": 0.1, "p11": 0.9, "obs": [[0.9, 0.1], [0.1, 0.9]], "throughput": 1.0 },
                    { "p01": 0.3, "p11": 0.6, "obs": [[1.0, 1.0]], "throughput": 0.5 } ] }
            ],
            "policies": ["myopic", "awi:2", "random"],
            "betas": [0.3, 0.9],
            "horizon": 15,
            "runs": 40
        }"#,
    )
    .unwrap();
    let out = dir.path().join("results.csv");
    let curves = dir.path().join("curves.csv");
    stdout(&awi(&[
        "simulate", "--seed", "5", "--config", config.to_str().unwrap(), "--out",
        out.to_str().unwrap(), "--curves", curves.to_str().unwrap(), "--emit-trace",
    ]));
    let table = rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(table.len(), 6);
    assert!(table.iter().all(|r| r[0] == "pair" && r[4] == "40" && r[5] == "15"));
    let curve_rows = rows(&std::fs::read_to_string(&curves).unwrap());
    assert_eq!(curve_rows.len(), 6 * 15);
    let trace = Path::new(&format!("{}.trace.jsonl", out.display())).to_path_buf();
    let lines = std::fs::read_to_string(trace).unwrap();
    assert_eq!(lines.lines().count(), 6);
}
