use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn qgtype(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgtype"))
        .args(args)
        .env_remove("QGTYPE_PRECISION")
        .output()
        .expect("spawn qgtype")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json output")
}

#[test]
fn eigenlist_csv_golden() {
    let o = qgtype(&["eigenlist", "gen", "--rule", "corner-units", "p=3", "--levels", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "n,value,multiplicity,mass\n0,2/3,1,2/3\n1,2/9,1,2/9\n2,2/27,1,2/27\n");

    let o = qgtype(&["eigenlist", "gen", "--rule", "corner-dual", "--prime", "5", "--levels", "2"]);
    assert_eq!(stdout(&o), "n,value,multiplicity,mass\n0,1/4,3,3/4\n1,1/20,4,1/5\n");
}

#[test]
fn pair_types() {
    let all = json(&qgtype(&["pair", "--subset", "all_primes"]));
    assert_eq!(all["types"], serde_json::json!(["III", "III"]));
    assert_eq!(all["checks"]["dual_equals_tensor"], true);
    assert_eq!(all["heuristic"], true);

    let sq = json(&qgtype(&["pair", "--subset", "squares"]));
    assert_eq!(sq["types"], serde_json::json!(["I_INF", "II_INF"]));
    assert_eq!(sq["heuristic"], false);
}

#[test]
fn exit_codes() {
    let o = qgtype(&["--bogus"]);
    assert_eq!(o.status.code(), Some(2));

    let o = qgtype(&["padic", "1/0", "--prime", "5"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(err["error"], "DivisionByZero");

    let o = qgtype(&["search", "--lambda", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(err["error"], "PreconditionViolated");
}

#[test]
fn output_is_deterministic() {
    for args in [
        &["pair", "--subset", "all_primes"][..],
        &["action", "verify", "--prime", "3", "--samples", "50", "--seed", "9"][..],
        &["report", "--primes", "8", "--csv"][..],
    ] {
        let a = qgtype(args);
        let b = qgtype(args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn precision_sources() {
    let mut cfg = tempfile::NamedTempFile::new().unwrap();
    write!(cfg, r#"{{"precision": 6}}"#).unwrap();
    let path = cfg.path().to_str().unwrap();

    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qgtype"));
        cmd.env_remove("QGTYPE_PRECISION");
        if let Some(e) = env {
            cmd.env("QGTYPE_PRECISION", e);
        }
        let o = cmd.args(extra).args(["padic", "1/3", "--prime", "5"]).output().unwrap();
        json(&o)["precision"].as_u64().unwrap()
    };
    assert_eq!(run(None, &[]), 32);
    assert_eq!(run(Some("10"), &[]), 10);
    assert_eq!(run(Some("10"), &["--config", path]), 6);
    assert_eq!(run(Some("10"), &["--config", path, "--precision", "12"]), 12);

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    write!(bad, r#"{{"precison": 6}}"#).unwrap();
    let o = qgtype(&["--config", bad.path().to_str().unwrap(), "padic", "1", "--prime", "5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn classify_spec_file() {
    let mut spec = tempfile::NamedTempFile::new().unwrap();
    write!(spec, r#"{{"subset": "all_primes", "rule": {{"kind": "powers", "lambda": "1/2"}}}}"#).unwrap();
    let v = json(&qgtype(&["classify", "--spec", spec.path().to_str().unwrap()]));
    assert_eq!(v["type"], "III");
    let est = v["lambda"]["estimate"].as_f64().unwrap();
    assert!((est - 0.5).abs() < 1e-3);

    let mut spec = tempfile::NamedTempFile::new().unwrap();
    write!(spec, r#"{{"subset": "all_primes", "rule": {{"kind": "uniform", "k": "3"}}}}"#).unwrap();
    let v = json(&qgtype(&["classify", "--spec", spec.path().to_str().unwrap()]));
    assert_eq!(v["type"], "II_1");
}

#[test]
fn measure_and_padic() {
    let v = json(&qgtype(&["measure", "ball(1,1)", "mult", "p=5"]));
    assert_eq!(v["measure"], "1/4");
    let v = json(&qgtype(&["padic", "1/3 + 2", "--prime", "5"]));
    assert_eq!(v["valuation"], 0);
    assert!(v["value"].as_str().unwrap().starts_with("p=5 v=0 digits=4,3,1,3"));
}

#[test]
fn action_verify_passes() {
    let v = json(&qgtype(&["action", "verify", "--prime", "2", "--samples", "100", "--seed", "3"]));
    assert_eq!(v["passed"], true);
    assert_eq!(v["samples"], 100);
}

#[test]
fn report_csv_rows() {
    let o = qgtype(&["report", "--primes", "3", "--csv"]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("primes,lambda_1,mult_1"));
    assert!(lines[1].starts_with("2,0.5,1,0.25,1"));
}
