//! End-to-end checks of the command-line contract: every command runs on its
//! shipped or minimal config, emitted CSV re-parses bit-exactly through the
//! tool's own reader, identical config and seed give byte-identical files,
//! and the exit codes follow the documented map (2 config, 3 numerical).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fplap_cli::table::Table;

fn fplap() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fplap"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("case.conf");
    fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    let out = fplap().args(args).output().unwrap();
    if out.status.code() != Some(0) {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn summary(dir: &Path, name: &str) -> serde_json::Value {
    let bytes = fs::read(dir.join(name)).unwrap();
    serde_json::from_slice(&bytes).unwrap()
}

#[test]
fn expand_runs_and_csv_round_trips_byte_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "[operator]\nd = 1\np = 3\ns = 0.5\n\n[field]\nname = rational\n\n\
         [sweep]\nkind = fractional\nx = 1.0\nabscissae = 0.2 0.1 0.05\n\
         regime = nonvanishing\nwindow = 3\n",
    );
    let out = run(&["expand", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("fitted order"));

    let csv_path = dir.join("expand.csv");
    let original = fs::read(&csv_path).unwrap();
    let table = Table::read_csv(&csv_path).unwrap();
    assert_eq!(table.columns, ["abscissa", "value", "reference", "abs_error"]);
    assert_eq!(table.rows.len(), 3);
    // Round trip: parse with the tool's own reader, re-emit, compare bytes.
    assert_eq!(table.to_csv_bytes().unwrap(), original);

    let report = summary(dir, "expand_summary.json");
    let fitted = report["eoc"]["slope"].as_f64().unwrap();
    assert!((fitted - 3.5).abs() < 0.3, "fitted order {fitted}");
}

#[test]
fn const_field_expand_finds_no_order_but_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "[operator]\nd = 1\np = 2.5\ns = 0.5\n\n[field]\nname = const\n\n\
         [sweep]\nkind = fractional\nx = 0.3\nabscissae = 0.2 0.1\n",
    );
    let out = run(&["expand", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    let report = summary(dir, "expand_summary.json");
    assert!(report["eoc"].is_null());
    assert!(report["note"].as_str().unwrap().contains("no order fitted"));
    for v in report["values"].as_array().unwrap() {
        assert!(v.as_f64().unwrap().abs() < 1e-12);
    }
}

#[test]
fn identical_config_and_seed_give_byte_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = shipped("evolve.conf");
    for dir in [&a, &b] {
        let out = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    for name in ["snapshots.csv", "metadata.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn snapshot_csv_round_trips_through_the_reader() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "[operator]\nd = 1\np = 3\ns = 0.5\n\n[u0]\nname = gauss-bump\n\n\
         [evolve]\nh = 0.1\nr = 0.4\nbox_radius = 2.0\nt_final = 0.01\n",
    );
    let out = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    let path = dir.join("snapshots.csv");
    let original = fs::read(&path).unwrap();
    let table = Table::read_csv(&path).unwrap();
    assert_eq!(table.to_csv_bytes().unwrap(), original);
    assert_eq!(table.columns[..2], ["index1".to_string(), "x1".to_string()]);
}

#[test]
fn paired_run_keeps_the_gap_within_delta() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "[operator]\nd = 1\np = 3\ns = 0.5\n\n[u0]\nname = gauss-bump\n\n\
         [evolve]\nh = 0.1\nr = 0.4\nbox_radius = 2.0\nt_final = 0.01\n\
         perturb_delta = 1e-3\n",
    );
    let out = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.join("snapshots_perturbed.csv").exists());

    let meta = summary(dir, "metadata.json");
    let dep = &meta["continuous_dependence"];
    let gap = dep["gap"].as_f64().unwrap();
    let delta = dep["delta"].as_f64().unwrap();
    assert!(gap <= delta + 1e-12, "gap {gap} vs delta {delta}");
}

#[test]
fn json_format_replaces_the_csv_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "[operator]\nd = 1\np = 3\ns = 0.5\n\n[field]\nname = rational\n\n\
         [sweep]\nkind = fractional\nx = 1.0\nabscissae = 0.2 0.1\noracle = false\n",
    );
    let out = run(&[
        "expand",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.join("expand.json").exists());
    assert!(!dir.join("expand.csv").exists());

    let table = summary(dir, "expand.json");
    assert_eq!(table["columns"].as_array().unwrap().len(), 2);
    assert_eq!(table["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn weights_command_reports_scaled_totals() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "[operator]\nd = 1\np = 3\ns = 0.5\n\n[weights]\nradii = 0.2 0.1\n",
    );
    let out = run(&[
        "weights",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));

    let table = Table::read_csv(dir.join("weights.csv")).unwrap();
    assert_eq!(table.columns[..4], ["r", "h", "total_scaled", "far"].map(String::from));
    assert_eq!(table.rows.len(), 2);
    // r^sp-scaled totals of the two radii stay within a modest factor.
    let (t0, t1) = (table.rows[0][2], table.rows[1][2]);
    assert!(t0 > 0.0 && t1 > 0.0 && t0 / t1 < 4.0 && t1 / t0 < 4.0);
}

#[test]
fn fig1_grid_contains_the_known_selection_row() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = shipped("fig1.conf");
    let out = run(&["study", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    let table = Table::read_csv(dir.join("fig1.csv")).unwrap();
    assert_eq!(table.columns, ["p", "s", "gamma", "nu", "mu", "order_in_h"]);
    // p = 1.5 selects mu = 10/39 independently of s in the nonvanishing regime.
    for row in table.rows.iter().filter(|row| (row[0] - 1.5).abs() < 1e-12) {
        assert!((row[4] - 10.0 / 39.0).abs() < 1e-12, "s {}: mu {}", row[1], row[4]);
    }
    let row = table
        .rows
        .iter()
        .find(|row| (row[0] - 1.5).abs() < 1e-12 && (row[1] - 0.1).abs() < 1e-12)
        .expect("p = 1.5, s = 0.1 row");
    assert!((row[5] - 6.0 / 13.0).abs() < 1e-12, "order {}", row[5]);
}

#[test]
fn fig2_fitted_orders_respect_the_expected_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = shipped("fig2.conf");
    let out = run(&["study", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    let table = Table::read_csv(dir.join("fig2.csv")).unwrap();
    assert_eq!(
        table.columns,
        ["p", "s", "mu", "expected_order", "fitted_order", "residual"]
    );
    for row in &table.rows {
        let (expected, fitted) = (row[3], row[4]);
        assert!(
            fitted > expected - 0.15 && fitted < expected + 0.75,
            "p {} s {}: fitted {fitted} vs expected {expected}",
            row[0],
            row[1]
        );
    }
}

#[test]
fn selftest_passes_and_writes_its_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = run(&["selftest", "--out", dir.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));

    let report = summary(dir, "selftest.json");
    assert_eq!(report["seed"].as_u64(), Some(7));
    assert_eq!(report["pass"].as_bool(), Some(true));
    assert_eq!(report["suites"].as_array().unwrap().len(), 4);
}

#[test]
fn config_errors_exit_2_with_file_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let unknown = write_config(
        dir,
        "[operator]\nd = 1\np = 3\ns = 0.5\nbogus = 7\n\n[field]\nname = rational\n\n\
         [sweep]\nkind = fractional\nx = 1.0\nabscissae = 0.2 0.1\n",
    );
    let out = fplap()
        .args(["expand", "--config", unknown.to_str().unwrap(), "--out", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("case.conf:5") && err.contains("bogus"), "{err}");

    let malformed = write_config(dir, "[operator]\nd = 1\np = banana\ns = 0.5\n");
    let out = fplap()
        .args(["expand", "--config", malformed.to_str().unwrap(), "--out", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("[operator] p") && err.contains("banana"), "{err}");

    let out = fplap().args(["expand", "--out", dir.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--config"), "{}", stderr(&out));
}

#[test]
fn cfl_violation_exits_3_unless_instability_is_allowed() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let body = "[operator]\nd = 1\np = 3\ns = 0.5\n\n[u0]\nname = gauss-bump\n\n\
                [evolve]\nh = 0.1\nr = 0.4\nbox_radius = 2.0\nt_final = 0.01\ntau = 5e-3\n";
    let cfg = write_config(dir, body);

    let out = fplap()
        .args(["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("CFL"), "{}", stderr(&out));

    let out = run(&[
        "evolve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--allow-unstable",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("exceeds the CFL bound"));
    let meta = summary(dir, "metadata.json");
    assert_eq!(meta["diagnostics"]["cfl_overridden"].as_bool(), Some(true));
}
