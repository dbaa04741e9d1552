use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use circreg::dataio::{read_csv, read_embedded_config};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn circreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circreg"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

/// Runs a data command on the packaged dataset.
fn on_dataset(cmd: &str, out: &Path, extra: &[&str]) -> Output {
    let input = data("example_trials.csv");
    let schema = data("trials_schema.toml");
    let mut args = vec![
        cmd,
        "--input",
        input.to_str().unwrap(),
        "--schema",
        schema.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend(extra);
    circreg(&args)
}

fn ok_json(o: &Output) -> Value {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&o.stdout).unwrap()
}

fn error_record(o: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&o.stderr);
    let line = stderr.lines().last().unwrap();
    serde_json::from_str(line).unwrap()
}

#[test]
fn help_lists_subcommands() {
    let o = circreg(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in ["fit", "bandwidth", "bands", "diagnose", "simulate"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(circreg(&["fit", "--selector", "bogus"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let o = circreg(&["fit", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let rec = error_record(&o);
    assert_eq!(rec["error"], "usage");
    assert_eq!(rec["exit_code"], 2);
}

#[test]
fn unmapped_column_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let schema = dir.path().join("schema.toml");
    let text = fs::read_to_string(data("trials_schema.toml")).unwrap();
    fs::write(&schema, text.replace("\"condition\"", "\"sensory_condition\"")).unwrap();
    let o = circreg(&[
        "fit",
        "--input",
        data("example_trials.csv").to_str().unwrap(),
        "--schema",
        schema.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let rec = error_record(&o);
    assert_eq!(rec["error"], "schema");
    assert!(rec["message"].as_str().unwrap().contains("sensory_condition"));
}

#[test]
fn wrong_bandwidth_count_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = on_dataset("fit", dir.path(), &["--bandwidths", "2.0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_writes_grid_and_embeds_config() {
    let dir = TempDir::new().unwrap();
    let summary = ok_json(&on_dataset(
        "fit",
        dir.path(),
        &["--bandwidths", "3.0,0.1", "--grid-size", "7", "--seed", "11"],
    ));
    let path = dir.path().join("fit.csv");
    let (header, rows) = read_csv(&path).unwrap();
    assert_eq!(header, ["x", "z", "m_hat", "m1", "m2"]);
    assert_eq!(rows.len(), 5 * 7);
    assert_eq!(rows[0][1], "Control");
    assert_eq!(rows[7][1], "Preview");
    for r in &rows {
        let m: f64 = r[2].parse().unwrap();
        assert!(m > -std::f64::consts::PI && m <= std::f64::consts::PI);
    }
    let embedded = read_embedded_config(&path).unwrap();
    assert_eq!(embedded["config"], summary["config"]);
    assert_eq!(embedded["config"]["seed"], 11);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn two_predictors_fit_at_design_points() {
    let dir = TempDir::new().unwrap();
    ok_json(&on_dataset(
        "fit",
        dir.path(),
        &[
            "--predictors",
            "target_distance,distance_error",
            "--selector",
            "rot",
        ],
    ));
    let (header, rows) = read_csv(&dir.path().join("fit.csv")).unwrap();
    assert_eq!(
        header,
        ["target_distance", "distance_error", "z", "m_hat", "m1", "m2"]
    );
    assert_eq!(rows.len(), 679);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "selector = \"rot\"\nseed = 5\nmethod = \"ll\"\n").unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["--config", cfg.to_str().unwrap()];
        args.extend(extra);
        ok_json(&on_dataset("bandwidth", dir.path(), &args))
    };
    let from_file = run(&[]);
    assert_eq!(from_file["config"]["seed"], 5);
    assert_eq!(from_file["config"]["selector"], "rot");
    assert_eq!(from_file["config"]["method"], "ll");
    let overridden = run(&["--seed", "9", "--method", "nw"]);
    assert_eq!(overridden["config"]["seed"], 9);
    assert_eq!(overridden["config"]["selector"], "rot");
    assert_eq!(overridden["config"]["method"], "nw");
    let written: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bandwidth.json")).unwrap()).unwrap();
    assert_eq!(written, overridden);

    fs::write(&cfg, "selectr = \"rot\"\n").unwrap();
    let o = on_dataset("bandwidth", dir.path(), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bands_per_condition() {
    let dir = TempDir::new().unwrap();
    let summary = ok_json(&on_dataset(
        "bands",
        dir.path(),
        &[
            "--bandwidths",
            "3.0,0.1",
            "--band-replicates",
            "40",
            "--grid-size",
            "6",
        ],
    ));
    let levels = summary["bands"].as_array().unwrap();
    assert_eq!(levels.len(), 5);
    let (header, rows) = read_csv(&dir.path().join("bands_Forward_Facing.csv")).unwrap();
    assert_eq!(header, ["x", "center", "lower", "upper", "alpha_final"]);
    assert_eq!(rows.len(), 6);
    for l in levels {
        let a = l["alpha_final"].as_f64().unwrap();
        assert!((0.05 / 6.0 - 1e-15..=0.05).contains(&a));
    }
}

#[test]
fn bands_reject_two_predictors() {
    let dir = TempDir::new().unwrap();
    let o = on_dataset(
        "bands",
        dir.path(),
        &[
            "--predictors",
            "target_distance,distance_error",
            "--selector",
            "rot",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn diagnose_reports_and_kde() {
    let dir = TempDir::new().unwrap();
    let report = ok_json(&on_dataset(
        "diagnose",
        dir.path(),
        &["--selector", "rot", "--kde-kappa", "15"],
    ));
    let gof: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("gof.json")).unwrap()).unwrap();
    assert_eq!(gof, report);
    assert_eq!(gof["gof"]["n"], 679);
    assert_eq!(gof["uniformity"]["by_level"].as_array().unwrap().len(), 5);
    let p = gof["uniformity"]["pooled"]["rayleigh_p"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    let (header, rows) = read_csv(&dir.path().join("kde.csv")).unwrap();
    assert_eq!(header[0], "theta");
    assert_eq!(header.len(), 6);
    assert_eq!(rows.len(), 360);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["--selector", "cv", "--seed", "3"];
    ok_json(&on_dataset(
        "fit",
        a.path(),
        &[&args[..], &["--threads", "1"]].concat(),
    ));
    ok_json(&on_dataset(
        "fit",
        b.path(),
        &[&args[..], &["--threads", "3"]].concat(),
    ));
    assert_eq!(
        read_csv(&a.path().join("fit.csv")).unwrap(),
        read_csv(&b.path().join("fit.csv")).unwrap()
    );
}

#[test]
fn simulate_small_table() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let summary = ok_json(&circreg(&[
        "simulate",
        "--regression",
        "r2",
        "--kappa",
        "3",
        "--n",
        "40",
        "--n1",
        "2",
        "--n2",
        "3",
        "--boot-replicates",
        "4",
        "--seed",
        "1",
        "--out",
        out,
    ]));
    assert_eq!(summary["runs"].as_array().unwrap().len(), 1);
    assert_eq!(summary["runs"][0]["dominance_violations"], 0);
    let (header, rows) = read_csv(&dir.path().join("table2.csv")).unwrap();
    assert_eq!(header, ["kappa", "n", "method", "mean", "variance"]);
    let methods: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(methods, ["cv", "boot", "rot", "oracle"]);
    let (_, ratios) = read_csv(&dir.path().join("ratios.csv")).unwrap();
    assert_eq!(ratios.len(), 3 * 3);

    let again = TempDir::new().unwrap();
    ok_json(&circreg(&[
        "simulate",
        "--regression",
        "r2",
        "--kappa",
        "3",
        "--n",
        "40",
        "--n1",
        "2",
        "--n2",
        "3",
        "--boot-replicates",
        "4",
        "--seed",
        "1",
        "--out",
        again.path().to_str().unwrap(),
    ]));
    assert_eq!(
        read_csv(&dir.path().join("table2.csv")).unwrap(),
        read_csv(&again.path().join("table2.csv")).unwrap()
    );
}
