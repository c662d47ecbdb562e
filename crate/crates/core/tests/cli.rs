use std::path::Path;
use std::process::{Command, Output};

use dht_lab::boundedness::BoundednessReport;
use dht_lab::cli::{Envelope, SplitReport};
use dht_lab::{ConvergenceStudy, InvertibilityVerdict, Problem};
use serde::de::DeserializeOwned;
use tempfile::TempDir;

fn dht(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dht-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("DHT_LAB_THREADS")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Parses an envelope and checks that re-serializing gives the same value.
fn round_trip<T: DeserializeOwned + serde::Serialize + PartialEq + std::fmt::Debug>(text: &str, command: &str) -> T {
    let env: Envelope<T> = serde_json::from_str(text).unwrap();
    assert_eq!(env.schema, 1);
    assert_eq!(env.command, command);
    let again: Envelope<T> = serde_json::from_str(&serde_json::to_string(&env).unwrap()).unwrap();
    assert_eq!(again, env);
    env.report
}

fn write(dir: &TempDir, name: &str, text: &str) {
    std::fs::write(dir.path().join(name), text).unwrap();
}

#[test]
fn bounded_single_atom() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir,
        "p.json",
        r#"{"family":{"family":"geometric","q":2,"n":20},"measure":{"measure":"atoms","atoms":[[[3,0],1.0]]}}"#,
    );
    let o = dht(&["bounded", "--input", "p.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: BoundednessReport = round_trip(&stdout(&o), "bounded");
    assert_eq!(r.condition_local, 1.0);
    let o = dht(&["bounded", "--input", "p.json", "--format", "csv"], dir.path());
    assert!(stdout(&o).starts_with("size,local,a2\n5,1.0,"));
}

#[test]
fn bounded_empty_measure_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir,
        "empty.json",
        r#"{"family":{"family":"geometric","q":2,"n":20},"measure":{"measure":"atoms","atoms":[]}}"#,
    );
    let o = dht(&["bounded", "--input", "empty.json"], dir.path());
    assert_eq!(code(&o), 0);
    let r: BoundednessReport = round_trip(&stdout(&o), "bounded");
    assert_eq!((r.condition_local, r.condition_a2), (0.0, 0.0));

    write(&dir, "bad.json", "{ not json");
    assert_eq!(code(&dht(&["bounded", "--input", "bad.json"], dir.path())), 1);
    assert_eq!(code(&dht(&["bounded", "--input", "missing.json"], dir.path())), 1);
    assert_eq!(code(&dht(&["bounded"], dir.path())), 1);
    assert_eq!(code(&dht(&["bounded", "--family", "{\"family\":\"nope\"}"], dir.path())), 1);
    assert_eq!(code(&dht(&["frobnicate"], dir.path())), 1);
    // nodes only: nothing to test boundedness against
    assert_eq!(code(&dht(&["bounded", "--family", r#"{"family":"geometric","q":2,"n":5}"#], dir.path())), 1);
}

#[test]
fn bounded_growth_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir,
        "p.json",
        r#"{"family":{"family":"geometric","q":2,"n":120},"measure":{"measure":"random","kind":"global-growth"}}"#,
    );
    let o = dht(&["bounded", "--input", "p.json", "--seed", "1"], dir.path());
    assert_eq!(code(&o), 2, "{}", stdout(&o));
}

#[test]
fn help_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let o = dht(&["--help"], dir.path());
    assert_eq!(code(&o), 0);
    for cmd in ["bounded", "split", "invert", "oracle", "generate"] {
        assert!(stdout(&o).contains(cmd));
    }
    assert_eq!(code(&dht(&["--version"], dir.path())), 0);
}

#[test]
fn split_three_per_annulus_and_empty() {
    let dir = tempfile::tempdir().unwrap();
    let o = dht(&["split", "--family", r#"{"family":"three-per-annulus","n":40}"#, "--epsilon", "0.1"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: SplitReport = round_trip(&stdout(&o), "split");
    assert!(!r.split.pieces.is_empty());
    assert!(r.split.pieces.iter().all(|p| p.certificate.certified));
    assert_eq!(r.studies.len(), r.split.pieces.len());

    write(
        &dir,
        "empty.json",
        r#"{"nodes":{"points":[[2,0],[4,0],[8,0]],"weights":[1,1,1]},"target":{"points":[]}}"#,
    );
    let o = dht(&["split", "--input", "empty.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: SplitReport = round_trip(&stdout(&o), "split");
    assert!(r.split.pieces.is_empty());

    let o = dht(&["split", "--family", r#"{"family":"three-per-annulus","n":40}"#, "--format", "csv"], dir.path());
    assert!(stdout(&o).starts_with("piece,size,sigma_max,sigma_min\n0,"));
}

#[test]
fn split_precheck_failure_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // forty targets packed into one annulus
    let pts: Vec<String> = (0..40).map(|k| format!("[{},0]", 5.0 + 0.05 * k as f64)).collect();
    write(
        &dir,
        "dense.json",
        &format!(
            r#"{{"nodes":{{"points":[[2,0],[4,0],[8,0],[16,0]],"weights":[1,1,1,1]}},"target":{{"points":[{}]}}}}"#,
            pts.join(",")
        ),
    );
    let o = dht(&["split", "--input", "dense.json"], dir.path());
    assert_eq!(code(&o), 2, "{}{}", stdout(&o), stderr(&o));
    assert!(stderr(&o).contains("precheck"));
}

#[test]
fn invert_example1_trichotomy() {
    let dir = tempfile::tempdir().unwrap();
    let spec = |c: f64| format!(r#"{{"family":"example1","c":{c},"n":200}}"#);

    let o = dht(&["invert", "--family", &spec(0.25)], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: InvertibilityVerdict = round_trip(&stdout(&o), "invert");
    assert_eq!(serde_json::to_value(v.verdict).unwrap(), "invertible");

    let o = dht(&["invert", "--family", &spec(0.75)], dir.path());
    assert_eq!(code(&o), 0);
    let v: InvertibilityVerdict = round_trip(&stdout(&o), "invert");
    assert_eq!(serde_json::to_value(v.verdict).unwrap(), "invertible-after-adjusting-one-point");
    assert!(stderr(&o).contains("advisory"));

    assert_eq!(code(&dht(&["invert", "--family", &spec(0.5)], dir.path())), 3);
}

#[test]
fn invert_csv_with_oracle_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let o = dht(
        &["invert", "--family", r#"{"family":"example1","c":0.25,"n":64}"#, "--format", "csv", "--out", "rho.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let rho = std::fs::read_to_string(dir.path().join("rho.csv")).unwrap();
    assert!(rho.starts_with("n,log_rho\n1,"));
    assert_eq!(rho.lines().count(), 65);
    let oracle = std::fs::read_to_string(dir.path().join("rho.oracle.csv")).unwrap();
    assert_eq!(oracle.lines().next(), Some("size,sigma_max,sigma_min"));
    assert_eq!(oracle.lines().last().unwrap().split(',').next(), Some("64"));
    // only the two outputs, no temporary files left behind
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn oracle_rows() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir,
        "one.json",
        r#"{"nodes":{"points":[[2,0]],"weights":[1]},"target":{"points":[[3,0]],"weights":[1]}}"#,
    );
    let o = dht(&["oracle", "--input", "one.json", "--format", "csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows: Vec<String> = stdout(&o).lines().skip(1).map(|l| l.split_once(',').unwrap().1.to_string()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r == &rows[0]));

    let o = dht(&["oracle", "--family", r#"{"family":"example1","c":0.5,"n":200}"#, "--format", "csv"], dir.path());
    let sigma_min: Vec<f64> = stdout(&o).lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(sigma_min.len(), 4);
    assert!(sigma_min.windows(2).all(|w| w[1] < w[0]), "{sigma_min:?}");

    let o = dht(
        &["oracle", "--family", r#"{"family":"cluster","t_ratio":8,"n_max":40}"#, "--sizes", "5,10,20,40"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let s: ConvergenceStudy = round_trip(&stdout(&o), "oracle");
    assert_eq!(s.sizes, vec![5, 10, 20, 40]);
    assert_eq!(serde_json::to_value(s.max_trend).unwrap(), "plateau");

    assert_eq!(code(&dht(&["oracle", "--family", r#"{"family":"example1","c":0.5,"n":20}"#, "--sizes", "10,5,20"], dir.path())), 1);
}

#[test]
fn generate_round_trips_through_input() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir,
        "p.json",
        r#"{"family":{"family":"example1","c":0.25,"n":40},"measure":{"measure":"random","kind":"bounded"}}"#,
    );
    let o = dht(&["generate", "--input", "p.json", "--seed", "3", "--out", "explicit.json"], dir.path());
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("explicit.json")).unwrap();
    let p: Problem = serde_json::from_str(&text).unwrap();
    assert_eq!(p.schema, 1);
    assert!(p.family.is_none() && p.nodes.is_some());
    assert_eq!(serde_json::to_string_pretty(&p).unwrap() + "\n", text);

    // the explicit problem gives the same verdict as the family
    let a = dht(&["invert", "--input", "explicit.json"], dir.path());
    let b = dht(&["invert", "--family", r#"{"family":"example1","c":0.25,"n":40}"#], dir.path());
    assert_eq!(code(&a), code(&b));
    let va: InvertibilityVerdict = round_trip(&stdout(&a), "invert");
    let vb: InvertibilityVerdict = round_trip(&stdout(&b), "invert");
    assert_eq!(va.verdict, vb.verdict);

    let o = dht(&["generate", "--input", "p.json", "--seed", "3", "--format", "csv"], dir.path());
    let csv = stdout(&o);
    assert!(csv.starts_with("set,index,re,im,offset_re,offset_im,weight\n"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("atom,")).count(), 40);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["oracle", "--family", r#"{"family":"example1","c":0.75,"n":100}"#, "--format", "csv"];
    let a = dht(&args, dir.path());
    let b = Command::new(env!("CARGO_BIN_EXE_dht-lab"))
        .args(args)
        .env("DHT_LAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_variable_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_dht-lab"))
        .args(["generate", "--family", r#"{"family":"geometric","q":2,"n":3}"#])
        .env("DHT_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
