use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use quantcurv::sphere::{theorem_main_experiment, HamiltonianField};
use tempfile::TempDir;

fn quantcurv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quantcurv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("config.toml");
    fs::write(&path, body).unwrap();
    path
}

fn run(config: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    quantcurv(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Header and rows, dropping the timestamp line.
fn body(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# generated"), "missing timestamp line");
    text.split_once('\n').unwrap().1.to_string()
}

fn records(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

const FOCK: &str = r#"
seed = 3

[[experiments]]
kind = "bargmann-curvature"
name = "fock"
output = "fock.csv"
n = 1
level = 4
degree = 12
random_pairs = 5
"#;

const SLICE: &str = r#"
seed = 11

[[experiments]]
kind = "teichmuller-symbol"
name = "slice"
output = "slice.csv"
samples = 200
"#;

#[test]
fn bargmann_run_reports_every_curvature_case() {
    let dir = TempDir::new().unwrap();
    let out = run(&write_config(&dir, FOCK), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let (header, rows) = records(&dir.path().join("fock.csv"));
    let check = col(&header, "check");
    for name in ["holomorphic", "antiholomorphic", "mixed", "plus-minus", "scalar", "ratio"] {
        assert!(rows.iter().any(|r| r[check] == name), "no {name} rows");
    }
    let pass = col(&header, "pass");
    assert!(rows.iter().all(|r| r[pass] == "true"));
    let hash = col(&header, "config_hash");
    assert!(rows.iter().all(|r| r[hash].len() == 16 && r[hash] == rows[0][hash]));
    // The mixed holomorphic/antiholomorphic case at n = 1 is 4·2 = 8.
    let mixed = rows.iter().find(|r| r[check] == "mixed").unwrap();
    let value: f64 = mixed[col(&header, "measured_re")].parse().unwrap();
    assert!((value - 8.0).abs() < 1e-10);
}

#[test]
fn sphere_run_matches_the_library() {
    let dir = TempDir::new().unwrap();
    let config = r#"
seed = 1

[[experiments]]
kind = "sphere-convergence"
output = "nested/decay.csv"
levels = [4, 8]
max_ratio = 10.0
"#;
    let out = run(&write_config(&dir, config), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let (header, rows) = records(&dir.path().join("nested/decay.csv"));
    for name in ["N", "dim", "eps_N", "ratio", "trace_lhs", "trace_rhs"] {
        col(&header, name);
    }
    let (h1, h2) = HamiltonianField::standard_pair();
    let expected = theorem_main_experiment(&h1, &h2, &[4, 8]).unwrap();
    assert_eq!(rows.len(), 2);
    for (row, e) in rows.iter().zip(&expected) {
        assert_eq!(row[col(&header, "N")], e.level.to_string());
        assert_eq!(row[col(&header, "dim")], e.dim.to_string());
        let eps: f64 = row[col(&header, "eps_N")].parse().unwrap();
        // 17 significant digits round-trip exactly.
        assert_eq!(eps, e.eps);
    }
    assert_eq!(rows[0][col(&header, "ratio")], "");
    assert!(rows[0][col(&header, "experiment")].starts_with("sphere-convergence-0"));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let config = format!("{FOCK}{}", SLICE.replace("seed = 11", ""));
    let path = write_config(&dir, &config);
    assert_eq!(run(&path, &["--workers", "1"]).status.code(), Some(0));
    let first = [body(&dir.path().join("fock.csv")), body(&dir.path().join("slice.csv"))];
    assert_eq!(run(&path, &["--workers", "2"]).status.code(), Some(0));
    let second = [body(&dir.path().join("fock.csv")), body(&dir.path().join("slice.csv"))];
    assert_eq!(first, second);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, SLICE);
    let csv = dir.path().join("slice.csv");
    run(&path, &[]);
    let default = body(&csv);
    run(&path, &["--seed", "11"]);
    assert_eq!(body(&csv), default);
    run(&path, &["--seed", "12"]);
    let other = body(&csv);
    assert_ne!(other, default);
    let (header, rows) = records(&csv);
    assert!(rows.iter().all(|r| r[col(&header, "pass")] == "true"));
}

#[test]
fn failed_assertion_exits_one() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, &SLICE.replace("samples = 200", "samples = 50\ntolerance = 1e-30"));
    let out = run(&path, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL slice"));
    let (header, rows) = records(&dir.path().join("slice.csv"));
    let pairing = rows.iter().find(|r| r[col(&header, "check")] == "pairing").unwrap();
    assert_eq!(pairing[col(&header, "pass")], "false");
}

#[test]
fn malformed_configs_exit_two_without_output() {
    let cases = [
        ("not toml at all [", "config error"),
        (&SLICE.replace("samples = 200", "samples = 200\ntolerence = 1e-3") as &str, "tolerence"),
        (&SLICE.replace("teichmuller-symbol", "torus-symbol"), "torus-symbol"),
        (&SLICE.replace("seed = 11", ""), "seed"),
        (&FOCK.replace("level = 4", "level = 0"), "bargmann"),
        (
            r#"seed = 1
[[experiments]]
kind = "schrodinger-intertwine"
output = "t.csv"
level = 4
dt = 0.1
t_end = 1.0
hamiltonians = ["rotation"]
"#,
            "20 steps",
        ),
        (
            r#"seed = 1
[[experiments]]
kind = "sphere-convergence"
output = "s.csv"
levels = [16, 8]
"#,
            "increasing",
        ),
    ];
    for (config, needle) in cases {
        let dir = TempDir::new().unwrap();
        let out = run(&write_config(&dir, config), &[]);
        assert_eq!(out.status.code(), Some(2), "config:\n{config}");
        assert!(stderr(&out).contains(needle), "expected `{needle}` in {}", stderr(&out));
        let files: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(files, vec!["config.toml"], "partial output for:\n{config}");
    }
    assert_eq!(quantcurv(&["run", "/nonexistent/config.toml"]).status.code(), Some(2));
    assert_eq!(quantcurv(&["run"]).status.code(), Some(2));
    assert_eq!(quantcurv(&["run", "x.toml", "--workers", "0"]).status.code(), Some(2));
}

fn synthetic(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn summarize_reports_verdicts_and_slope() {
    let dir = TempDir::new().unwrap();
    let sphere = synthetic(
        &dir,
        "sphere.csv",
        "# generated\nexperiment,config_hash,N,eps_N,pass\n\
         decay,abc,8,0.4,true\ndecay,abc,16,0.2,true\ndecay,abc,32,0.1,true\ndecay,abc,64,0.05,true\n",
    );
    let other = synthetic(&dir, "other.csv", "experiment,config_hash,pass\nfock,abc,true\nfock,abc,true\n");
    let out = quantcurv(&["summarize", sphere.to_str().unwrap(), other.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("PASS decay: 4 of 4 rows pass, decay slope -1.000"), "{text}");
    assert!(text.contains("PASS fock: 2 of 2 rows pass"), "{text}");
}

#[test]
fn summarize_lists_failing_rows() {
    let dir = TempDir::new().unwrap();
    let mixed = synthetic(&dir, "mixed.csv", "experiment,config_hash,check,pass\nslice,abc,pairing,true\nslice,abc,reduction,false\n");
    let out = quantcurv(&["summarize", mixed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("FAIL slice: 1 of 2 rows pass"), "{text}");
    assert!(text.contains("slice,abc,reduction,false"), "{text}");
}

#[test]
fn summarize_rejects_missing_columns() {
    let dir = TempDir::new().unwrap();
    let bad = synthetic(&dir, "bad.csv", "experiment,pass\nx,true\n");
    let out = quantcurv(&["summarize", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing column `config_hash`"));
    let no_eps = synthetic(&dir, "sphere.csv", "experiment,config_hash,eps_N,pass\nx,a,0.1,true\n");
    let out = quantcurv(&["summarize", no_eps.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing column `N`"));
}

#[test]
fn run_output_round_trips_through_summarize() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&write_config(&dir, FOCK), &[]).status.code(), Some(0));
    let out = quantcurv(&["summarize", dir.path().join("fock.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("PASS fock:"));
}
