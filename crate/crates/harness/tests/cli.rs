use std::path::Path;
use std::process::{Command, Output};

use logrem_harness::record::{read_csv, COLUMNS};

fn logrem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logrem"))
        .args(args)
        .env_remove("LOGREM_WORKERS")
        .output()
        .expect("binary runs")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().next().expect("stderr line")).expect("stderr is JSON")
}

const FREE_ENERGY: &[&str] = &[
    "free-energy",
    "--n",
    "64,256",
    "--beta",
    "0.5,2.5",
    "--fields",
    "40",
    "--seed",
    "5",
];

#[test]
fn csv_output_round_trips() {
    let out = logrem(FREE_ENERGY);
    assert_eq!(out.status.code(), Some(0));
    let rows = read_csv(&out.stdout[..]).unwrap();
    // 2 sizes x 2 temperatures, plus one verdict per temperature.
    assert_eq!(rows.len(), 6);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
    for r in rows.iter().filter(|r| r.metric == "free-energy") {
        assert!(r.theory.is_some());
        assert_eq!(r.theory_tag, "rem-free-energy");
        assert_eq!(r.wallclock_ms, 0.0);
    }
}

#[test]
fn json_output_matches_schema() {
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/result.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let runs: [&[&str]; 4] = [
        FREE_ENERGY,
        &[
            "overlap-cdf",
            "--n",
            "64",
            "--beta",
            "2.5",
            "--q-grid",
            "0.25,0.75",
            "--fields",
            "8",
            "--replicas",
            "20",
            "--seed",
            "1",
        ],
        &["pd-moments", "--alpha", "0.4", "--pd-samples", "50", "--seed", "1"],
        &[
            "high-points",
            "--n",
            "64",
            "--gammas",
            "0.3,0.9",
            "--fields",
            "8",
            "--seed",
            "2",
        ],
    ];
    for args in runs {
        let mut args = args.to_vec();
        args.extend(["--format", "json"]);
        let out = logrem(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let errors: Vec<String> = validator.iter_errors(&value).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{args:?}: {errors:?}");
    }
}

#[test]
fn identical_output_for_any_worker_count() {
    let args = [
        "overlap-cdf",
        "--n",
        "128",
        "--beta",
        "2",
        "--q-grid",
        "0.5",
        "--fields",
        "16",
        "--replicas",
        "30",
        "--seed",
        "11",
    ];
    let reference = logrem(&[&args[..], &["--workers", "1"]].concat()).stdout;
    assert!(!reference.is_empty());
    for w in ["4", "8"] {
        assert_eq!(
            logrem(&[&args[..], &["--workers", w]].concat()).stdout,
            reference,
            "workers {w}"
        );
    }
    let env = Command::new(env!("CARGO_BIN_EXE_logrem"))
        .args(args)
        .env("LOGREM_WORKERS", "3")
        .output()
        .unwrap();
    assert_eq!(env.stdout, reference);
}

#[test]
fn file_output_writes_plot_beside_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fe.csv");
    let mut args = FREE_ENERGY.to_vec();
    let p = path.to_str().unwrap();
    args.extend(["--out", p]);
    let out = logrem(&args);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(read_csv(std::fs::File::open(&path).unwrap()).unwrap().len(), 6);
    let plot = std::fs::read_to_string(dir.path().join("free-energy.plot.csv")).unwrap();
    assert_eq!(plot.lines().next().unwrap(), "series,x,y,yerr,theory");
    assert_eq!(plot.lines().count(), 5);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"experiment": "sample", "n": [64, 128], "fieldBudget": 10, "rootSeed": 3, "outputFormat": "json"}"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let out = logrem(&["--config", p, "--n", "32"]);
    assert_eq!(out.status.code(), Some(0));
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert!(rows.iter().all(|r| r["n"] == 32));
    assert_eq!(rows.len(), 3);
}

#[test]
fn invalid_config_exits_2() {
    let cases: [&[&str]; 5] = [
        &["sample", "--n", "64"],
        &["sample", "--n", "2", "--seed", "1"],
        &["free-energy", "--n", "64", "--seed", "1"],
        &["not-an-experiment"],
        &["bk-check", "--n", "64", "--beta", "2", "--alpha", "1.5", "--seed", "1"],
    ];
    for args in cases {
        let out = logrem(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = stderr_json(&out);
        assert_eq!(err["error"], "invalid-config", "{args:?}");
        assert!(err["field"].is_string());
    }
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"experiment": "sample", "n": 64, "rootSeed": 1, "fieldsBudget": 5}"#,
    )
    .unwrap();
    let out = logrem(&["--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_1() {
    let out = logrem(&[
        "sample",
        "--n",
        "16",
        "--fields",
        "4",
        "--seed",
        "1",
        "--out",
        "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "io");
}

#[test]
fn help_and_version_exit_0() {
    for flag in ["--help", "--version"] {
        assert_eq!(logrem(&[flag]).status.code(), Some(0));
    }
}

#[test]
fn non_power_of_two_warns_but_runs() {
    let out = logrem(&["sample", "--n", "100", "--fields", "4", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr_json(&out)["warning"].as_str().unwrap().contains("100"));
}

#[test]
fn timing_fills_wallclock() {
    let out = logrem(&["sample", "--n", "256", "--fields", "50", "--seed", "1", "--timing"]);
    let rows = read_csv(&out.stdout[..]).unwrap();
    assert!(rows.iter().all(|r| r.wallclock_ms > 0.0));
}
