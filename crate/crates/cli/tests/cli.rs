use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ssbt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssbt")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&out.stdout));
    })
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn names() -> Vec<String> {
    let out = ssbt(&["list", "--json"]);
    assert!(out.status.success());
    json(&out).as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap().to_string()).collect()
}

#[test]
fn list_is_stable_and_matches_json() {
    let a = ssbt(&["list"]);
    let b = ssbt(&["list"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let names = names();
    assert_eq!(text.lines().count(), names.len());
    for (line, name) in text.lines().zip(&names) {
        assert!(line.starts_with(name.as_str()));
    }
    assert!(names.iter().any(|n| n == "paper_bilevel"));
    assert!(names.iter().any(|n| n == "paper_lower_level"));
}

#[test]
fn solve_paper_bilevel_from_the_documented_start() {
    let out = ssbt(&["solve", "--problem", "paper_bilevel", "--x0", "5,-1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["status"], "converged");
    let x = floats(&r["x"]);
    assert!(x.iter().all(|v| v.abs() <= 1e-3), "{x:?}");
    assert!(r["theta"].as_f64().unwrap() <= 1e-5);
    assert!(r["oracle_calls"].as_u64().unwrap() <= 200);
    assert_eq!(floats(&r["x0"]), vec![5.0, -1.0]);
    let trace = r["trace"].as_array().unwrap();
    assert_eq!(floats(&trace[0]["center"]), vec![5.0, -1.0]);
}

#[test]
fn numeric_lower_level_reaches_the_same_point() {
    let out = ssbt(&["solve", "--problem", "paper_bilevel", "--lower-level", "numeric", "--x0", "5,-1"]);
    assert_eq!(out.status.code(), Some(0));
    let x = floats(&json(&out)["x"]);
    assert!(x.iter().all(|v| v.abs() <= 1e-3), "{x:?}");
}

#[test]
fn solve_exit_codes_over_the_registry() {
    for name in names() {
        let out = ssbt(&["solve", "--problem", &name, "--no-timing"]);
        if name == "paper_lower_level" {
            // no scalar objective
            assert_eq!(out.status.code(), Some(1), "{name}");
            continue;
        }
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let starved = ssbt(&["solve", "--problem", &name, "--max-oracle-calls", "1", "--no-timing"]);
        assert_eq!(starved.status.code(), Some(2), "{name}");
        assert_eq!(json(&starved)["status"], "budget_exhausted");
    }
}

#[test]
fn errors_exit_with_one() {
    assert_eq!(ssbt(&["solve", "--problem", "nosuch"]).status.code(), Some(1));
    assert_eq!(ssbt(&["solve", "--problem", "l1_n2", "--x0", "1,2,3"]).status.code(), Some(1));
    assert_eq!(ssbt(&["solve", "--problem", "l1_n2", "--x0", "a,b"]).status.code(), Some(1));
    assert_eq!(ssbt(&["solve"]).status.code(), Some(1));
    assert_eq!(ssbt(&["bogus"]).status.code(), Some(1));
    assert_eq!(ssbt(&["verify", "scdss", "--problem", "l1_n2"]).status.code(), Some(1));
    assert_eq!(ssbt(&["--help"]).status.code(), Some(0));
}

#[test]
fn reports_are_byte_identical_without_timing() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = Command::new(env!("CARGO_BIN_EXE_ssbt"))
            .args(["solve", "--problem", "maxq_n2", "--no-timing", "--seed", "11", "--out"])
            .arg(path)
            .output()
            .unwrap();
        assert!(out.status.success());
        assert!(out.stdout.is_empty());
    }
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    let v: Value = serde_json::from_slice(&ta).unwrap();
    assert!(v.get("wall_time_seconds").is_none());
    assert_eq!(v["seed"], 11);
    // floats survive a text round trip exactly
    let again: Value = serde_json::from_str(&serde_json::to_string_pretty(&v).unwrap()).unwrap();
    assert_eq!(again, v);

    let v1 = ssbt(&["verify", "ss", "--problem", "paper_bilevel", "--seed", "0x5"]);
    let v2 = ssbt(&["verify", "ss", "--problem", "paper_bilevel", "--seed", "5"]);
    assert_eq!(v1.stdout, v2.stdout);
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let toml = write(dir.path(), "opts.toml", "seed = 9\n[solver]\ntol = 1e-4\nmax_iterations = 77\n");
    let r = json(&ssbt(&["solve", "--problem", "l1_n2", "--config", &toml, "--tol", "1e-7"]));
    assert_eq!(r["options"]["tol"].as_f64().unwrap(), 1e-7);
    assert_eq!(r["options"]["max_iterations"], 77);
    assert_eq!(r["seed"], 9);

    let js = write(dir.path(), "opts.json", r#"{"solver": {"max_oracle_calls": 1}}"#);
    let out = ssbt(&["solve", "--problem", "l1_n2", "--config", &js]);
    assert_eq!(out.status.code(), Some(2));
    let out = ssbt(&["solve", "--problem", "l1_n2", "--config", &js, "--max-oracle-calls", "500"]);
    assert_eq!(out.status.code(), Some(0));

    let bad = write(dir.path(), "bad.toml", "tolerance = 1\n");
    assert_eq!(ssbt(&["solve", "--problem", "l1_n2", "--config", &bad]).status.code(), Some(1));
}

#[test]
fn problem_files_are_solved() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "half.json",
        r#"{
            "schema_version": 1, "name": "weighted_half", "dim": 2,
            "objective": {"kind": "l1", "weights": [1.0, 2.0]},
            "polyhedron": {"a_ineq": [[-1.0, 0.0]], "b_ineq": [-1.0]},
            "x0": [3.0, -2.0],
            "known_solution": {"x": [1.0, 0.0], "value": 1.0}
        }"#,
    );
    let out = ssbt(&["solve", "--problem-file", &file]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["problem"], "weighted_half");
    let x = floats(&r["x"]);
    assert!((x[0] - 1.0).abs() <= 1e-6 && x[1].abs() <= 1e-6, "{x:?}");

    let bilevel = write(
        dir.path(),
        "bilevel.json",
        r#"{"schema_version": 1, "name": "b", "dim": 2,
            "objective": {"kind": "paper_bilevel", "lower_level": "numeric"}, "x0": [5.0, -1.0]}"#,
    );
    let r = json(&ssbt(&["solve", "--problem-file", &bilevel]));
    assert!(floats(&r["x"]).iter().all(|v| v.abs() <= 1e-3));

    let unknown = write(
        dir.path(),
        "bad.json",
        r#"{"schema_version": 1, "name": "q", "dim": 1, "extra": 0, "objective": {"kind": "l1"}, "x0": [0.0]}"#,
    );
    assert_eq!(ssbt(&["solve", "--problem-file", &unknown]).status.code(), Some(1));
    assert_eq!(
        ssbt(&["solve", "--problem", "l1_n2", "--problem-file", &file]).status.code(),
        Some(1)
    );
}

#[test]
fn verify_checks_pass_on_builtins() {
    let ss = ssbt(&["verify", "ss", "--problem", "paper_bilevel", "--point", "0,0"]);
    assert_eq!(ss.status.code(), Some(0));
    let r = json(&ss);
    assert_eq!(r["pass"], true);
    assert_eq!(r["detail"]["check"], "ss");
    let profile = &r["detail"]["points"][0]["profile"];
    assert_eq!(floats(&profile["radii"]).len(), floats(&profile["worst_ratio"]).len());

    let clarke = ssbt(&["verify", "clarke", "--problem", "paper_lower_level", "--point", "0"]);
    assert_eq!(clarke.status.code(), Some(0));
    assert_eq!(json(&clarke)["detail"]["points"][0]["report"]["contained"], true);

    let single = ssbt(&["verify", "singleton", "--problem", "l1_n2", "--box", "-1,1", "--n", "500"]);
    assert_eq!(single.status.code(), Some(0));
    let d = &json(&single)["detail"];
    assert_eq!(d["n_samples"], 500);
    assert!(d["fraction"].as_f64().unwrap() >= 0.999);

    let scd = ssbt(&["verify", "scdss", "--problem", "paper_lower_level", "--point", "0"]);
    assert_eq!(scd.status.code(), Some(0));
    assert_eq!(floats(&json(&scd)["detail"]["points"][0]["point"]), vec![0.0, 0.0, 0.0]);
    let full = ssbt(&["verify", "scdss", "--problem", "paper_lower_level", "--point", "0.5,0.5,0"]);
    assert_eq!(full.status.code(), Some(0));
}

#[test]
fn verify_fails_with_two_off_a_bad_point() {
    // a 1-sample singleton run at the kink sees a two-element cocl
    let out = ssbt(&["verify", "singleton", "--problem", "paper_lower_level", "--box", "-1e-9,1e-9", "--n", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["pass"], false);
}
