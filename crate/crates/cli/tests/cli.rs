//! End-to-end runs of the `solver` binary on small configurations.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn small_config(n_patches: usize) -> Value {
    let lx = 0.75 * (n_patches as f64 - 1.0) + 1.0;
    json!({
        "grid": { "lx": lx, "ly": 0.5, "h": 0.0625 },
        "media": { "kind": "oscillatory", "epsilon": 0.125 },
        "layout": { "n_patches": n_patches, "patch_width": 1.0, "stride": 0.75 },
        "boundary": { "kind": "sine" },
        "rsvd": { "k": 10, "p": 4, "seed": 7 },
        "run": { "method": "reduced", "T": 12, "track_history": true }
    })
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn solver(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solver")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn offline_online_pipeline_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_config(3));
    let archive = dir.path().join("maps.bin");
    let out = solver(&["offline", "--config", s(&cfg), "--archive", s(&archive)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let prefix = dir.path().join("run");
    let out = solver(&["online", "--config", s(&cfg), "--archive", s(&archive), "--out", s(&prefix)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("loop 0"), "{stdout}");

    let (h, rows) = read_csv(&dir.path().join("run_history.csv"));
    assert_eq!(h, ["iter", "rel_error", "rel_change", "rel_error_global"]);
    assert_eq!(rows.len(), 13);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[0][2], "", "no change is defined before the first sweep");
    assert!(rows[1..].iter().all(|r| r[2].parse::<f64>().is_ok()));

    let (h, rows) = read_csv(&dir.path().join("run_field.csv"));
    assert_eq!(h, ["x", "y", "u"]);
    assert_eq!(rows.len(), 41 * 9);
}

#[test]
fn history_is_skipped_when_not_tracked() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small_config(3);
    v["run"]["track_history"] = json!(false);
    let cfg = write_config(dir.path(), "c.json", &v);
    let prefix = dir.path().join("van");
    let out = solver(&["vanilla", "--config", s(&cfg), "--out", s(&prefix)]);
    assert!(out.status.success());
    assert!(dir.path().join("van_field.csv").exists());
    assert!(!dir.path().join("van_history.csv").exists());
}

#[test]
fn constant_media_with_affine_data_gives_the_affine_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small_config(3);
    v["media"] = json!({ "kind": "constant", "value": 1.0 });
    v["boundary"] = json!({ "kind": "affine", "cx": 1.0 });
    v["run"]["method"] = json!("vanilla");
    v["run"]["T"] = json!(60);
    let cfg = write_config(dir.path(), "c.json", &v);
    let field = dir.path().join("u.csv");
    let out = solver(&["solution", "--config", s(&cfg), "--out", s(&field)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&field);
    for r in rows {
        let x: f64 = r[0].parse().unwrap();
        let u: f64 = r[2].parse().unwrap();
        assert!((u - x).abs() < 1e-12, "u({x}) = {u}");
    }
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small_config(3);
    v["grid"]["h"] = json!(0.07);
    let cfg = write_config(dir.path(), "bad.json", &v);
    let out = solver(&["vanilla", "--config", s(&cfg), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid"));

    let mut v = small_config(3);
    v["run"]["extra"] = json!(1);
    let cfg = write_config(dir.path(), "bad2.json", &v);
    let out = solver(&["vanilla", "--config", s(&cfg), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run"));

    let cfg = write_config(dir.path(), "ok.json", &small_config(3));
    let out = solver(&["spectrum", "--config", s(&cfg), "--out", s(&dir.path().join("s.csv")), "--patch", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0..=2"));

    let out = solver(&["online", "--config", s(&cfg), "--archive", s(&dir.path().join("missing.bin")), "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn archive_from_another_setup_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.json", &small_config(3));
    let archive = dir.path().join("maps.bin");
    assert!(solver(&["offline", "--config", s(&cfg), "--archive", s(&archive)]).status.success());

    let mut v = small_config(3);
    v["media"]["epsilon"] = json!(0.25);
    let other = write_config(dir.path(), "b.json", &v);
    let out = solver(&["online", "--config", s(&other), "--archive", s(&archive), "--out", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("media"), "{err}");
}

#[test]
fn bench_lists_reduced_rows_then_vanilla() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_config(3));
    let out_csv = dir.path().join("bench.csv");
    let out = solver(&["bench", "--config", s(&cfg), "--out", s(&out_csv), "--ranks", "6,10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = read_csv(&out_csv);
    assert_eq!(h, ["method", "k", "offline_s", "online_s", "total_s", "final_rel_error"]);
    let labels: Vec<(&str, &str)> = rows.iter().map(|r| (r[0].as_str(), r[1].as_str())).collect();
    assert_eq!(labels, [("reduced", "6"), ("reduced", "10"), ("vanilla", "")]);

    let out = solver(&["bench", "--config", s(&cfg), "--out", s(&out_csv), "--ranks", "200"]);
    assert_eq!(out.status.code(), Some(2));
}
