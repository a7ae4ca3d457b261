use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rgsched(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgsched"))
        .current_dir(dir)
        .env_remove("RGSCHED_MAX_STATES")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn gap_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgsched(
        dir.path(),
        &[
            "gap", "--ns", "2,8", "--eps", "0.1", "--out", "gap.csv", "--digits", "4",
        ],
    );
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("gap.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("n,gipp_true_pred,gipp_true_true,ratio"));
    assert_eq!(lines[1], "2,8.6500,7.4750,1.1572,8,4,173/20,299/40,346/299");
}

#[test]
fn generate_schedule_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = rgsched(
        d,
        &[
            "gen",
            "lower-bound",
            "--n",
            "2",
            "--eps",
            "1/10",
            "--out-truth",
            "t.json",
            "--out-pred",
            "p.json",
        ],
    );
    assert!(gen.status.success());
    assert!(rgsched(
        d,
        &["schedule", "--policy", "gipp", "p.json", "--out", "s.json"]
    )
    .status
    .success());

    let closed = rgsched(
        d,
        &[
            "evaluate",
            "--method",
            "closed",
            "--schedule",
            "s.json",
            "--truth",
            "t.json",
        ],
    );
    assert_eq!(json(&closed)["value"], "173/20");
    let enumerated = rgsched(
        d,
        &[
            "evaluate",
            "--method",
            "enum",
            "--schedule",
            "s.json",
            "--truth",
            "t.json",
        ],
    );
    assert_eq!(json(&enumerated)["value"], "173/20");
    let mc = rgsched(
        d,
        &[
            "evaluate",
            "--method",
            "mc",
            "--samples",
            "20000",
            "--seed",
            "4",
            "--schedule",
            "s.json",
            "--truth",
            "t.json",
        ],
    );
    let report = json(&mc);
    let (mean, se) = (
        report["value_decimal"].as_f64().unwrap(),
        report["stderr"].as_f64().unwrap(),
    );
    assert!((mean - 8.65).abs() <= 4.0 * se);

    let opt = rgsched(d, &["opt", "t.json"]);
    assert_eq!(json(&opt)["value"], "299/40");

    fs::write(d.join("r.json"), r#"{"sizes": ["11/10", "4"]}"#).unwrap();
    let run = rgsched(d, &["run", "s.json", "r.json"]);
    assert_eq!(json(&run)["total"], "36/5");
}

#[test]
fn rg_schedule_needs_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    rgsched(d, &["gen", "random", "--seed", "3", "--out", "i.json"]);
    let missing = rgsched(d, &["schedule", "--policy", "rg", "i.json"]);
    assert_eq!(missing.status.code(), Some(2));
    let ok = rgsched(
        d,
        &["schedule", "--policy", "rg", "--alpha", "3/2", "i.json"],
    );
    assert!(ok.status.success());
    assert_eq!(json(&ok)["policy"]["kind"], "rg");
}

#[test]
fn closeness_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("a.json"), r#"{"atoms": [["1", "1"]]}"#).unwrap();
    fs::write(
        d.join("b.json"),
        r#"{"atoms": [["1/4", "1/2"], ["1", "1/2"]]}"#,
    )
    .unwrap();
    assert_eq!(
        rgsched(d, &["check-close", "--alpha", "2", "a.json", "b.json"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        rgsched(d, &["check-close", "--alpha", "1.9", "a.json", "b.json"])
            .status
            .code(),
        Some(1)
    );
    let min = rgsched(d, &["min-alpha", "a.json", "b.json", "--tol", "1e-6"]);
    let found: f64 = stdout(&min).trim().parse().unwrap();
    assert!((found - 2.0).abs() < 1e-6);

    rgsched(
        d,
        &[
            "gen",
            "close-pair",
            "--alpha",
            "1.5",
            "--seed",
            "2",
            "--out-truth",
            "t.json",
            "--out-pred",
            "p.json",
        ],
    );
    assert_eq!(
        rgsched(d, &["check-close", "--alpha", "1.5", "t.json", "p.json"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        rgsched(d, &["check-close", "--alpha", "1.5", "t.json", "a.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn quanta_and_order() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("i.json"),
        r#"{"jobs": [{"atoms": [["1", "1/2"], ["4", "1/2"]]}, {"atoms": [["2", "1"]]}]}"#,
    )
    .unwrap();
    let quanta = json(&rgsched(d, &["quanta", "i.json"]));
    assert_eq!(quanta[0][0]["length"], "1");
    assert_eq!(quanta[0][0]["rank"], "1/2");
    assert_eq!(quanta[1][0]["rank"], "1/2");
    let order = json(&rgsched(d, &["order", "i.json"]));
    let jobs: Vec<u64> = order
        .as_array()
        .unwrap()
        .iter()
        .map(|q| q["job"].as_u64().unwrap())
        .collect();
    assert_eq!(jobs, vec![0, 1, 0]);
}

#[test]
fn robust_reports_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = rgsched(
        d,
        &[
            "robust", "--alphas", "1.1,2", "--trials", "5", "--seed", "7", "--out", "r.csv",
            "--json", "r.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(d.join("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 10);

    let again = rgsched(
        d,
        &[
            "robust", "--alphas", "1.1,2", "--trials", "5", "--seed", "7",
        ],
    );
    assert_eq!(stdout(&again), csv);
}

#[test]
fn state_cap_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    rgsched(
        d,
        &[
            "gen",
            "lower-bound",
            "--n",
            "3",
            "--out-truth",
            "t.json",
            "--out-pred",
            "p.json",
        ],
    );
    let capped = Command::new(env!("CARGO_BIN_EXE_rgsched"))
        .current_dir(d)
        .env("RGSCHED_MAX_STATES", "4")
        .args(["opt", "t.json"])
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&capped.stderr).contains("exceeds the cap"));
}

#[test]
fn bad_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("bad.json"),
        r#"{"jobs": [{"atoms": [["1", "1/3"]]}]}"#,
    )
    .unwrap();
    let out = rgsched(d, &["opt", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(rgsched(d, &["opt", "missing.json"]).status.code(), Some(2));
}
