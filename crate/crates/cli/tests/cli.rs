use std::path::Path;
use std::process::{Command, Output};

fn convexflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convexflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_is_deterministic() {
    let a = convexflow(&["generate", "bench", "--n", "10", "--seed", "3"]);
    let b = convexflow(&["generate", "bench", "--n", "10", "--seed", "3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let doc: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(doc["edges"].as_array().unwrap().len(), 25);
}

#[test]
fn solve_then_round() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let sol = dir.path().join("sol.json");
    let rounded = dir.path().join("rounded.json");
    let s = |p: &Path| p.to_str().unwrap().to_string();

    assert_eq!(
        code(&convexflow(&[
            "generate",
            "bench",
            "--n",
            "6",
            "--mu",
            "0.01",
            "--q0",
            "0.1",
            "--out",
            &s(&inst)
        ])),
        0
    );
    let out = convexflow(&["solve", &s(&inst), "--out", &s(&sol)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&sol);
    let (d, p) = (
        doc["objective_dual"].as_f64().unwrap(),
        doc["objective_primal"].as_f64().unwrap(),
    );
    assert!(p <= d + 1e-9 * (1.0 + d.abs()));
    assert_eq!(doc["edges"].as_array().unwrap().len(), 9);

    let conic = convexflow(&["solve", &s(&inst), "--conic"]);
    assert_eq!(code(&conic), 0);
    let cdoc: serde_json::Value = serde_json::from_slice(&conic.stdout).unwrap();
    assert!((cdoc["objective_dual"].as_f64().unwrap() - d).abs() <= 1e-7);

    assert_eq!(
        code(&convexflow(&[
            "round",
            &s(&inst),
            &s(&sol),
            "--out",
            &s(&rounded)
        ])),
        0
    );
    let r = json(&rounded);
    assert!(r["fee_delta"].as_f64().unwrap() >= 0.0);
    assert_eq!(r["bracket"]["within_bound"], serde_json::Value::Bool(true));
    assert!(r["edges"].as_array().unwrap().iter().all(|e| {
        let l = e["lambda"].as_f64().unwrap();
        l == 0.0 || l == -1.0
    }));
}

#[test]
fn knapsack_matches_subset_sum() {
    let out = convexflow(&["knapsack", "--c", "2,3", "--b", "5"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["optimum"].as_f64(), Some(-5.0));
    assert_eq!(v["pattern"], serde_json::json!([0, 1]));
    let out = convexflow(&["knapsack", "--c", "2,2", "--b", "5"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["optimum"].is_null());
    assert_eq!(v["subset_sum_reachable"], serde_json::Value::Bool(false));
}

#[test]
fn bench_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("report.csv");
    let out = convexflow(&[
        "bench",
        "--n",
        "6,8",
        "--seeds",
        "2",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,m,mu,q0,seed,dual_opt,primal_heur,rel_gap,tie_count,runtime_ms,status")
    );
    assert_eq!(lines.count(), 2 * 2 * 2 * 2);
    let meta = json(&dir.path().join("report.csv.meta.json"));
    assert_eq!(meta["generator"], "splitmix64");
}

#[test]
fn exit_codes() {
    assert_eq!(code(&convexflow(&["solve", "/definitely/missing.json"])), 2);
    assert_eq!(code(&convexflow(&["frobnicate"])), 2);
    assert_eq!(code(&convexflow(&["generate", "bench", "--n", "1"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"version": 99, "n": 1}"#).unwrap();
    assert_eq!(code(&convexflow(&["solve", bad.to_str().unwrap()])), 2);

    // an iteration budget too small to converge still writes the solution
    let inst = dir.path().join("inst.json");
    let sol = dir.path().join("sol.json");
    assert_eq!(
        code(&convexflow(&[
            "generate",
            "bench",
            "--n",
            "10",
            "--mu",
            "0.01",
            "--q0",
            "1",
            "--out",
            inst.to_str().unwrap()
        ])),
        0
    );
    let out = convexflow(&[
        "solve",
        inst.to_str().unwrap(),
        "--max-iter",
        "1",
        "--out",
        sol.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    assert!(json(&sol)["objective_dual"].is_f64());
}
