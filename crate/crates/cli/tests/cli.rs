use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dccpd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dccpd"))
        .args(args)
        .output()
        .expect("spawn dccpd")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn corrupt_config_exits_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{ \"n\": 3, ").unwrap();
    let out = dccpd(&["exact", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn corrupt_tensor_file_exits_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.json");
    std::fs::write(&input, "[1, 2, 3]").unwrap();
    let out = dccpd(&[
        "decompose",
        "--input",
        path_str(&input),
        "--out",
        path_str(&dir.path().join("s.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_then_decompose_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.json");
    let sol = dir.path().join("sol.json");
    let gen = dccpd(&[
        "generate",
        "--n",
        "4",
        "--r",
        "7",
        "--m",
        "3",
        "--seed",
        "5",
        "--out",
        path_str(&data),
    ]);
    assert!(
        gen.status.success(),
        "{}",
        String::from_utf8_lossy(&gen.stderr)
    );

    let dec = dccpd(&[
        "decompose",
        "--input",
        path_str(&data),
        "--out",
        path_str(&sol),
    ]);
    assert!(
        dec.status.success(),
        "{}",
        String::from_utf8_lossy(&dec.stderr)
    );
    let report = read_json(&dir.path().join("sol.json.report.json"));
    assert_eq!(report["rank"], 7);
    assert!(report["epsilon"].as_f64().unwrap() < 1e-8);
    assert!(sol.exists());
}

#[test]
fn rank_override_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.json");
    let sol = dir.path().join("sol.json");
    assert!(dccpd(&[
        "generate",
        "--n",
        "3",
        "--r",
        "4",
        "--seed",
        "2",
        "--out",
        path_str(&data)
    ])
    .status
    .success());
    let dec = dccpd(&[
        "decompose",
        "--input",
        path_str(&data),
        "--rank",
        "3",
        "--solvers",
        "als",
        "--max-iter",
        "20",
        "--out",
        path_str(&sol),
    ]);
    assert!(
        dec.status.success(),
        "{}",
        String::from_utf8_lossy(&dec.stderr)
    );
    let report = read_json(&dir.path().join("sol.json.report.json"));
    assert_eq!(report["rank"], 3);
}

#[test]
fn rmax_table_to_stdout() {
    let out = dccpd(&["rmax", "--n-list", "2,3", "--m", "3"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains("rmax"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn doa_with_long_frames_is_within_two_degrees() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("doa.csv");
    let out = dccpd(&[
        "doa",
        "--runs",
        "1",
        "--snr-db",
        "20",
        "--samples-per-bin",
        "1600",
        "--frame-len",
        "100",
        "--solvers",
        "algebraic+als",
        "--out",
        path_str(&out_csv),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read_json(&dir.path().join("doa.csv.doa.json"));
    let runs = report["runs"].as_array().unwrap();
    assert!(!runs.is_empty());
    for run in runs {
        let max = run["max_error"].as_f64().unwrap();
        assert!(max < 2.0, "max angle error {max}");
    }
}

#[test]
fn circular_array_with_more_sources_than_sensors() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("circ.csv");
    let out = dccpd(&[
        "doa",
        "--runs",
        "1",
        "--array",
        "circular",
        "--sensors",
        "4",
        "--sources",
        "18:9,54:27,90:45,126:63,162:81",
        "--max-iter",
        "30",
        "--out",
        path_str(&out_csv),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(&out_csv).unwrap();
    assert!(csv
        .lines()
        .any(|l| l.contains("cpd-c-lite") && l.ends_with("inapplicable")));
    let report = read_json(&dir.path().join("circ.csv.doa.json"));
    for run in report["runs"].as_array().unwrap() {
        assert_eq!(run["estimates"].as_array().unwrap().len(), 5);
    }
}
