use std::path::Path;
use std::process::Command;

use wiener_lab::cli::{content_hash, run_with_env, sweep_figure3};

fn lab(args: &[&str], out: &Path) -> i32 {
    let mut argv = vec!["wiener-lab".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.push("--out".into());
    argv.push(out.display().to_string());
    run_with_env(argv, None)
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wiener-lab"));
    c.env_remove("WIENER_LAB_SEED");
    c
}

#[test]
fn analytic_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    assert_eq!(lab(&["analytic", "--rates", "1,2"], &out), 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("curve,R,value"));
    assert_eq!(lines.count(), 6);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("curves.json")).unwrap()).unwrap();
    assert_eq!(meta["output_hash"], content_hash(csv.as_bytes()));
    fn snake(v: &serde_json::Value) -> bool {
        match v {
            serde_json::Value::Object(m) => m.iter().all(|(k, v)| {
                k.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_') && snake(v)
            }),
            _ => true,
        }
    }
    assert!(snake(&meta));
}

#[test]
fn idrf_emits_a_row_per_n() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("idrf.csv");
    assert_eq!(lab(&["idrf", "--n", "10,100,1000", "--kinds", "lower,upper"], &out), 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    for kind in ["lower", "upper"] {
        assert_eq!(csv.lines().filter(|l| l.contains(kind)).count(), 3, "{csv}");
    }
}

#[test]
fn reruns_are_byte_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--scheme", "uniform", "--rates", "1,2", "--horizon", "200", "--reps", "8", "--seed", "7"];
    let mut outputs = Vec::new();
    let out = dir.path().join("run.csv");
    for jobs in ["1", "8", "8"] {
        let mut a = args.to_vec();
        a.extend(["--jobs", jobs]);
        assert_eq!(lab(&a, &out), 0);
        outputs.push((std::fs::read(&out).unwrap(), std::fs::read(out.with_extension("json")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn seed_variable_fills_in_a_missing_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let base = ["wiener-lab", "simulate", "--horizon", "200", "--reps", "4", "--out"];
    let mut argv: Vec<String> = base.iter().map(|s| s.to_string()).collect();
    argv.push(a.display().to_string());
    assert_eq!(run_with_env(argv.clone(), Some("99")), 0);
    *argv.last_mut().unwrap() = b.display().to_string();
    argv.extend(["--seed".into(), "99".into()]);
    assert_eq!(run_with_env(argv, None), 0);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn exit_codes() {
    let ok = bin().args(["analytic", "--rates", "1"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8(ok.stdout).unwrap().starts_with("curve,R,value\n"));
    let bad_rate = bin().args(["analytic", "--rates", "-1"]).output().unwrap();
    assert_eq!(bad_rate.status.code(), Some(2));
    let short = bin().args(["simulate", "--rates", "1", "--horizon", "10", "--reps", "2"]).output().unwrap();
    assert_eq!(short.status.code(), Some(2));
    let usage = bin().args(["simulate", "--scheme", "nope"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
    let bad_env = bin().args(["simulate", "--horizon", "100", "--reps", "2"]).env("WIENER_LAB_SEED", "x").output().unwrap();
    assert_eq!(bad_env.status.code(), Some(2));
}

#[test]
fn small_sweep_orders_the_curves() {
    let csv = sweep_figure3(&[1.0, 2.0], Some(2000.0), 10, 3, None, 4).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("curve,R,mse,ci"));
    let rows: Vec<(String, f64, f64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 8);
    for r in [1.0, 2.0] {
        let get = |c: &str| rows.iter().find(|x| x.0 == c && x.1 == r).unwrap();
        let (ddet, soi, lloyd) = (get("ddet"), get("soi"), get("greedy_lloyd_max"));
        assert!(soi.2 <= ddet.2);
        assert!(lloyd.2 >= ddet.2 - 3.0 * lloyd.3);
    }
}
