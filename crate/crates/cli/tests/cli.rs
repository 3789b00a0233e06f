use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hofa-lab"));
    c.env_remove("HOFA_CAP");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    v["report"].clone()
}

/// `x_1 x_2` on `F_2^n` as a two-color table.
fn x1x2(n: usize) -> String {
    let values: Vec<usize> = (0..1usize << n).map(|x| (x & 1) & ((x >> 1) & 1)).collect();
    serde_json::json!({"p": 2, "n": n, "colors": ["0", "1"], "values": values}).to_string()
}

#[test]
fn gowers_of_constant_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.json", r#"{"p":2,"n":3,"values":[1,1,1,1,1,1,1,1]}"#);
    let r = report(&run(&["gowers", "--in", f.to_str().unwrap(), "--d", "2", "--mode", "exact"]));
    assert_eq!(r["value"], 1.0);
}

#[test]
fn gowers_of_x1x2_phase() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.json", r#"{"p":2,"n":2,"alpha":{"num":0,"depth":0},"terms":[{"exps":[1,1],"k":0,"c":1}]}"#);
    let r = report(&run(&["gowers", "--in", f.to_str().unwrap(), "--d", "2"]));
    assert_eq!(r["value"], 0.707106781187);
}

#[test]
fn tester_rate_matches_exhaustive() {
    let dir = tempfile::tempdir().unwrap();
    for n in [2, 4] {
        let f = write(dir.path(), "f.json", &x1x2(n));
        let r = report(&run(&[
            "test", "--in", f.to_str().unwrap(), "--property", "linearity", "--d", "2", "--trials", "10000", "--seed", "7", "--exact",
        ]));
        let exact = r["exact"]["value"].as_f64().unwrap();
        let (lo, hi) = (r["ci"][0].as_f64().unwrap(), r["ci"][1].as_f64().unwrap());
        assert!(lo <= exact && exact <= hi, "n={n}: {exact} outside [{lo}, {hi}]");
        assert_eq!(r["rejects"].as_u64().unwrap() + r["accepts"].as_u64().unwrap(), 10000);
    }
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(report(&out)["passed"], true);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.json", &x1x2(4));
    let r = write(dir.path(), "r.json", r#"{"p":2,"n":3,"values":[0.1,0.9,0.3,0.5,1,0,0.2,0.7]}"#);
    let cases: Vec<Vec<&str>> = vec![
        vec!["test", "--in", f.to_str().unwrap(), "--property", "linearity", "--trials", "500", "--seed", "3"],
        vec!["gowers", "--in", r.to_str().unwrap(), "--d", "3", "--mode", "sampled", "--samples", "2000", "--seed", "9"],
        vec!["regularize", "--in", r.to_str().unwrap(), "--theta", "0.2", "--seed", "1"],
        vec!["regularize", "--in", r.to_str().unwrap(), "--seed", "1", "--format", "csv"],
    ];
    for args in cases {
        let a = run(&args);
        let b = run(&args);
        assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn manifest_records_inputs_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.json", &x1x2(3));
    let out = run(&["test", "--in", f.to_str().unwrap(), "--property", "linearity", "--trials", "10", "--seed", "5"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let m = &v["manifest"];
    assert_eq!(m["subcommand"], "test");
    assert_eq!(m["seed"], 5);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["inputs"][0]["name"], "f.json");
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_seed_is_generated_and_printed() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.json", &x1x2(3));
    let out = run(&["test", "--in", f.to_str().unwrap(), "--property", "linearity", "--trials", "10"]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let printed: u64 = stderr.trim().strip_prefix("seed: ").unwrap().parse().unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["manifest"]["seed"], printed);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"p\": 2,\n \"n\": oops}");
    let out = run(&["gowers", "--in", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let short = write(dir.path(), "short.json", r#"{"p":2,"n":2,"colors":["0","1"],"values":[0,1]}"#);
    let out = run(&["test", "--in", short.to_str().unwrap(), "--property", "linearity", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));

    let f = write(dir.path(), "f.json", r#"{"p":2,"n":3,"values":[1,1,1,1,1,1,1,1]}"#);
    let out = run(&["gowers", "--in", f.to_str().unwrap(), "--d", "3", "--cap", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["gowers", "--in", f.to_str().unwrap(), "--d", "3"]).env("HOFA_CAP", "10").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn consistency_and_complexity() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", r#"{"p":3,"l":2,"rows":[[1,0],[0,1],[1,1]]}"#);
    let r = report(&run(&["consistency", "--in", s.to_str().unwrap()]));
    assert_eq!(r["size"], "9");
    assert_eq!(r["stabilized"], true);
    let r = report(&run(&["complexity", "--in", s.to_str().unwrap()]));
    assert_eq!(r["classification"]["finite_complexity"], true);
}

#[test]
fn decompose_and_rank() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "p.json",
        r#"{"p":3,"n":1,"alpha":{"num":0,"depth":0},"terms":[{"exps":[1],"k":0,"c":1},{"exps":[2],"k":0,"c":1}]}"#,
    );
    let r = report(&run(&["decompose", "--in", p.to_str().unwrap()]));
    assert_eq!(r["reconstructs"], true);
    let labels: Vec<(u64, u64)> =
        r["parts"].as_array().unwrap().iter().map(|h| (h["d"].as_u64().unwrap(), h["k"].as_u64().unwrap())).collect();
    assert_eq!(labels, vec![(1, 0), (2, 0)]);
    let r = report(&run(&["rank", "--in", p.to_str().unwrap(), "--seed", "0"]));
    assert!(r["analytic_rank"].as_f64().unwrap() > 0.0);
}

#[test]
fn density_counts_instances() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.json", r#"{"p":2,"n":2,"colors":["0","1"],"values":[0,1,1,0]}"#);
    let pat = write(dir.path(), "pat.json", r#"{"system":{"p":2,"l":2,"rows":[[1,0],[0,1],[1,1]]},"psi":[1,1,0]}"#);
    let r = report(&run(&["density", "--in", f.to_str().unwrap(), "--pattern", pat.to_str().unwrap()]));
    // x, y with parity 1 each: 2 * 2 tuples, and then x + y has parity 0.
    assert_eq!(r["density"]["num"], 4);
    assert_eq!(r["density"]["den"], 16);
}

#[test]
fn recolor_removes_planted_instance() {
    let dir = tempfile::tempdir().unwrap();
    let mut values = vec![0usize; 32];
    values[1] = 1;
    let f = write(dir.path(), "f.json", &serde_json::json!({"p":2,"n":5,"colors":["0","1"],"values":values}).to_string());
    let pats = write(dir.path(), "h.json", r#"[{"system":{"p":2,"l":1,"rows":[[1]]},"psi":[1]}]"#);
    let r = report(&run(&[
        "recolor", "--in", f.to_str().unwrap(), "--patterns", pats.to_str().unwrap(), "--linear", "2", "--threshold", "0.2", "--seed", "0",
    ]));
    assert_eq!(r["report"]["residual"][0], 0);
    assert!(r["distance"].as_f64().unwrap() <= 0.25 + 1.0 / 32.0);
}
