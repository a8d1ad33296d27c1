use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn flagcrit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flagcrit")).args(args).output().expect("binary runs")
}

fn report(args: &[&str]) -> (Value, i32) {
    let out = flagcrit(args);
    let code = out.status.code().expect("exit code");
    let v = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: stdout {:?} stderr {:?}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    });
    (v, code)
}

fn results(args: &[&str]) -> Value {
    let (v, code) = report(args);
    assert_eq!(code, 0, "{v}");
    v["results"].clone()
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn dim_reports_flag_and_ambient_sizes() {
    let r = results(&["dim", "--sig", "1,2:3"]);
    assert_eq!(r["flag_dim"], 3);
    assert_eq!(r["ambient"]["pluecker"], json!([3, 3]));
    assert_eq!(r["ambient"]["isospectral"], 6);
    let r = results(&["dim", "--sig", "2:4"]);
    assert_eq!(r["flag_dim"], 4);
    let r = results(&["dim", "--sig", "1,2,3,4:5"]);
    assert_eq!(r["flag_dim"], 10);
}

#[test]
fn generators_for_pluecker_single_relation() {
    let r = results(&["generators", "--model", "pluecker", "--sig", "1,2:3"]);
    assert_eq!(r["count"], 1);
    assert_eq!(r["degrees"], json!([2]));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(flagcrit(&["dim", "--sig", "3,2:4"]).status.code(), Some(2));
    assert_eq!(flagcrit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(flagcrit(&["enumerate", "multi-eigen", "--n", "4"]).status.code(), Some(2));
    assert_eq!(flagcrit(&["verify", "--points", "/nonexistent/points.json"]).status.code(), Some(2));
}

#[test]
fn enumerate_counts() {
    let r = results(&["enumerate", "multi-eigen", "--n", "5", "--k", "2", "--seed", "3"]);
    assert_eq!(r["count"], 10);
    assert_eq!(r["all_pass"], true);
    let r = results(&["enumerate", "cca", "--p", "3", "--q", "3", "--k", "2"]);
    assert_eq!(r["count"], 24);
    let r = results(&["enumerate", "hetero-diag-3-2"]);
    assert_eq!(r["count"], 40);
    assert_eq!(r["all_pass"], true);
    let r = results(&["enumerate", "iso", "--n", "3"]);
    assert_eq!(r["count"], 6);
    let r = results(&["enumerate", "ca", "--n", "3", "--p", "4", "--k", "2"]);
    assert_eq!(r["count"], 3);
}

#[test]
fn verify_accepts_enumerated_points_and_rejects_others() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("points.json");
    let saved = saved.to_str().unwrap();
    let out = flagcrit(&["enumerate", "multi-eigen", "--n", "4", "--k", "2", "--json", saved, "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());

    let r = results(&["verify", "--points", saved]);
    assert_eq!(r["passed"], 6);

    // Perturbed critical points leave the variety.
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(saved).unwrap()).unwrap();
    let problem = doc["results"]["problem"].clone();
    let perturbed: Vec<Value> = doc["results"]["points"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let x: Vec<f64> = p["point"].as_array().unwrap().iter().enumerate().map(|(j, v)| v.as_f64().unwrap() + 1e-2 * ((i + j) % 3) as f64 - 1e-2).collect();
            json!(x)
        })
        .collect();
    let path = write(dir.path(), "perturbed.json", &json!({ "problem": problem, "points": perturbed }));
    let (v, code) = report(&["verify", "--points", &path]);
    assert_eq!(code, 1, "{v}");
    assert_eq!(v["results"]["passed"], 0);

    // On the variety but not stationary: residual passes, rank gap does not.
    let conv = results(&["convert", "--sig", "2:4", "--to", "projection", "--seed", "9"]);
    let m = conv["output"]["data"][0].as_array().unwrap();
    let upper: Vec<f64> = (0..4).flat_map(|i| (i..4).map(move |j| (i, j))).map(|(i, j)| m[i][j].as_f64().unwrap()).collect();
    let path = write(dir.path(), "random.json", &json!({ "points": [upper] }));
    let problem_path = write(dir.path(), "problem.json", &problem);
    let (v, code) = report(&["verify", "--points", &path, "--problem", &problem_path]);
    assert_eq!(code, 1, "{v}");
    let cert = &v["results"]["certificates"][0];
    assert!(cert["residual"].as_f64().unwrap() < 1e-8, "{cert}");
    assert!(cert["rank_gap"].as_u64().unwrap() > 0, "{cert}");
}

#[test]
fn verify_hetero_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("hetero.json");
    let saved = saved.to_str().unwrap();
    assert_eq!(flagcrit(&["enumerate", "hetero-diag-3-2", "--json", saved, "--quiet"]).status.code(), Some(0));
    let r = results(&["verify", "--points", saved]);
    assert_eq!(r["passed"], 40);
}

#[test]
fn solve_heterogeneous_three_by_two() {
    let r = results(&["solve", "hetero", "--n", "3", "--k", "2", "--seed", "7"]);
    assert_eq!(r["distinct"], 40);
    assert_eq!(r["orbits"]["orbits"], 10);
    assert_eq!(r["bezout"], 512);
    assert_eq!(r["conjecture"], 40);
    let r = results(&["solve", "hetero", "--n", "3", "--k", "2", "--diagonal"]);
    assert_eq!(r["distinct"], 40);
}

#[test]
fn solve_linear_objective_on_projective_line() {
    let r = results(&["solve", "lo-pgr", "--n", "2", "--k", "1"]);
    assert_eq!(r["on_variety"], 2);
    assert_eq!(r["expected_on_variety"], 2);
}

#[test]
fn bezout_budget_is_enforced() {
    let out = flagcrit(&["solve", "hetero", "--n", "5", "--k", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("refusing"));
}

#[test]
fn results_are_identical_across_runs_and_thread_counts() {
    let run = |threads: &str| {
        let out = flagcrit(&["solve", "hetero", "--n", "2", "--k", "2", "--seed", "5", "--threads", threads]);
        assert_eq!(out.status.code(), Some(0));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        serde_json::to_string(&v["results"]).unwrap()
    };
    let one = run("1");
    assert_eq!(one, run("1"));
    assert_eq!(one, run("2"));
    let enumerate = || {
        let v: Value = serde_json::from_slice(&flagcrit(&["enumerate", "cca", "--p", "4", "--q", "3", "--k", "2"]).stdout).unwrap();
        serde_json::to_string(&v["results"]).unwrap()
    };
    assert_eq!(enumerate(), enumerate());
}

#[test]
fn reproduce_fast_targets_pass() {
    for target in ["conversions", "statistics"] {
        let out = flagcrit(&["reproduce", target]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).contains("pass"));
    }
    assert_eq!(flagcrit(&["reproduce", "table9"]).status.code(), Some(2));
}
