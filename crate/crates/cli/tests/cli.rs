use std::path::PathBuf;
use std::process::{Command, Output};

use phaseless::{Certificate, NonconvexityWitness, SolutionSet, StabilityReport, WitnessPair};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_phaseless"));
    c.env_remove("PHASELESS_THREADS");
    c
}

fn file(name: &str, contents: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn a3() -> PathBuf {
    file("a3.csv", "3,2\n1,0\n0,1\n1,1\n")
}

fn i2() -> PathBuf {
    file("i2.json", r#"{"m": 2, "d": 2, "entries": [[1, 0], [0, 1]]}"#)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn s(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_exit_codes() {
    let a = a3();
    let unique = run(&["solve", s(&a), s(&file("b123.csv", "1\n2\n3\n"))]);
    assert_eq!(unique.status.code(), Some(0));
    let set: SolutionSet = serde_json::from_slice(&unique.stdout).unwrap();
    assert_eq!(set.classes.len(), 1);

    let multi = run(&["solve", s(&a), s(&file("b111.json", r#"{"values": [1, 1, 1]}"#))]);
    assert_eq!(multi.status.code(), Some(2));
    let set: SolutionSet = serde_json::from_slice(&multi.stdout).unwrap();
    assert_eq!(set.classes.len(), 3);
    assert!((set.optimal_value - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn malformed_input_reports_line() {
    let bad = file("bad.csv", "3,2\n1,0\n0,oops\n1,1\n");
    let out = run(&["solve", s(&bad), s(&file("b3.csv", "1\n1\n1\n"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");

    let short = run(&["solve", s(&a3()), s(&file("b2.csv", "1\n1\n"))]);
    assert_eq!(short.status.code(), Some(1));
}

#[test]
fn certify_modes() {
    let out = run(&["certify", s(&a3()), "--mode", "scp"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["kind"], "SCP");
    assert!((v["evidence"]["sigma"].as_f64().unwrap() - 0.618_034).abs() < 1e-6);

    let v = json(&run(&["certify", s(&i2()), "--mode", "cp"]));
    assert_eq!(v["verdict"], "fails");
    assert_eq!(v["evidence"]["violating_subset"], serde_json::json!([0]));

    let zero = file("zero.csv", "0\n0\n0\n");
    let v = json(&run(&["certify", s(&a3()), s(&zero), "--mode", "poly"]));
    assert_eq!(v["verdict"], "inconclusive");

    let b111 = file("b111c.csv", "1\n1\n1\n");
    let out = run(&["certify", s(&a3()), s(&b111), "--mode", "exact"]);
    assert_eq!(out.status.code(), Some(2));

    let x0 = file("x0.csv", "1\n2\n");
    let eta = file("eta.csv", "0.2\n0\n0\n");
    let out = run(&["certify", s(&a3()), "--mode", "near-surface", "--x0", s(&x0), "--eta", s(&eta)]);
    assert_eq!(json(&out)["verdict"], "holds");

    let out = run(&["certify", s(&a3()), "--mode", "near-surface"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["certify", s(&a3()), "--mode", "bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn montecarlo() {
    let out = run(&["montecarlo", s(&a3()), "--samples", "1000", "--seed", "3", "--box", "0,1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["nonunique"], 0);
    assert_eq!(v["fraction"].as_f64(), Some(0.0));

    let v = json(&run(&["montecarlo", s(&a3()), "--samples", "0"]));
    assert!(v["fraction"].is_null());

    let out = run(&["montecarlo", s(&i2()), "--samples", "10"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn instability() {
    for (eps, ratio) in [("0.1", 20.0), ("0.5", 4.0)] {
        let out = run(&["instability", s(&a3()), "--epsilon", eps]);
        assert_eq!(out.status.code(), Some(0));
        let w: WitnessPair = serde_json::from_slice(&out.stdout).unwrap();
        assert!((w.projection_ratio - ratio).abs() < ratio * 1e-8);
    }
    let seed = file("seed.csv", "1\n1\n1\n");
    let out = run(&["instability", s(&a3()), "--epsilon", "0.1", "--seed-b", s(&seed)]);
    assert_eq!(out.status.code(), Some(0));
    for bad in ["0", "1", "1.5", "-0.1"] {
        let out = run(&["instability", s(&a3()), "--epsilon", bad]);
        assert_eq!(out.status.code(), Some(1), "{bad}");
    }
    // K_A is a ray for d = 1: no seed exists
    let ray = file("ray.csv", "3,1\n1\n2\n-1\n");
    let out = run(&["instability", s(&ray), "--epsilon", "0.1", "--trials", "4"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn scan_and_nonconvexity() {
    let center = file("c123.csv", "1\n2\n3\n");
    let out = run(&["scan", s(&a3()), s(&center), "--radius", "0.2", "--samples", "40", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let r: StabilityReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r.pairs.len(), 40);
    assert!(r.max_projection_ratio <= 1.0 + 1e-6);

    let bad = file("c111.csv", "1\n1\n1\n");
    let out = run(&["scan", s(&a3()), s(&bad), "--radius", "0.1"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["witness-nonconvex", s(&a3())]);
    assert_eq!(out.status.code(), Some(0));
    let w: NonconvexityWitness = serde_json::from_slice(&out.stdout).unwrap();
    assert!(w.midpoint_distance > 1e-6);

    let out = run(&["witness-nonconvex", s(&i2())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reports_are_deterministic() {
    let a = a3();
    let center = file("c123d.csv", "1\n2\n3\n");
    let cases: Vec<Vec<&str>> = vec![
        vec!["montecarlo", s(&a), "--samples", "200", "--seed", "9"],
        vec!["scan", s(&a), s(&center), "--radius", "0.1", "--samples", "30", "--seed", "4"],
        vec!["instability", s(&a), "--epsilon", "0.01"],
    ];
    for args in cases {
        let one = bin().args(&args).arg("--threads").arg("1").output().unwrap();
        let many = bin().args(&args).env("PHASELESS_THREADS", "4").output().unwrap();
        assert!(one.status.success());
        assert_eq!(one.stdout, many.stdout, "{args:?}");
    }
}

#[test]
fn emitted_json_roundtrips() {
    let out = run(&["solve", s(&a3()), s(&file("b111r.csv", "1\n1\n1\n"))]);
    let set: SolutionSet = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(serde_json::to_string_pretty(&set).unwrap() + "\n", String::from_utf8(out.stdout).unwrap());

    let out = run(&["certify", s(&a3()), "--mode", "scp"]);
    let c: Certificate = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(serde_json::to_string_pretty(&c).unwrap() + "\n", String::from_utf8(out.stdout).unwrap());
}

#[test]
fn verbose_goes_to_stderr() {
    let quiet = run(&["solve", s(&a3()), s(&file("bv.csv", "1\n2\n3\n"))]);
    let loud = run(&["--verbose", "solve", s(&a3()), s(&file("bv.csv", "1\n2\n3\n"))]);
    assert_eq!(quiet.stdout, loud.stdout);
    assert!(quiet.stderr.is_empty());
    assert!(!loud.stderr.is_empty());
}
