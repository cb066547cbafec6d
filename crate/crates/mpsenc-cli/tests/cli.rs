use std::path::Path;
use std::process::{Command, Output};

fn mpsenc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpsenc"))
        .args(args)
        .output()
        .expect("spawn mpsenc")
}

fn tmp(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("mpsenc-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn read(dir: &Path, f: &str) -> Vec<u8> {
    std::fs::read(dir.join(f)).unwrap_or_else(|e| panic!("{f}: {e}"))
}

const LEVY: [&str; 8] = ["--dist", "levy", "--scale", "1", "-L", "5", "-n", "8"];

#[test]
fn validate_succeeds_and_writes_artifacts() {
    let out = tmp("validate");
    let mut args = vec!["validate"];
    args.extend(LEVY);
    args.extend(["--out", out.to_str().unwrap()]);
    let o = mpsenc(&args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["ks_test_p_value"].as_f64().unwrap() > 0.05);
    for f in [
        "circuit.qasm",
        "circuit.json",
        "report.json",
        "histogram.csv",
        "plot.csv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert!(String::from_utf8(read(&out, "circuit.qasm"))
        .unwrap()
        .starts_with("OPENQASM 2.0;"));
}

#[test]
fn reruns_from_config_are_byte_identical() {
    let a = tmp("rerun-a");
    let b = tmp("rerun-b");
    let mut args = vec!["encode"];
    args.extend(LEVY);
    args.extend(["--out", a.to_str().unwrap()]);
    assert_eq!(mpsenc(&args).status.code(), Some(0));

    let cfg = tmp("rerun-cfg");
    std::fs::create_dir_all(&cfg).unwrap();
    let path = cfg.join("run.json");
    let text = format!(
        r#"{{"version":1,"distribution":{{"kind":"levy","scale":1.0,"L":5.0}},"n_qubits":8,"output_dir":{:?}}}"#,
        b.to_str().unwrap()
    );
    std::fs::write(&path, text).unwrap();
    for _ in 0..2 {
        let o = mpsenc(&["circuit", "--config", path.to_str().unwrap()]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let first = read(&b, "circuit.qasm");
    assert_eq!(
        mpsenc(&["circuit", "--config", path.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(first, read(&b, "circuit.qasm"));
    assert_eq!(
        mpsenc(&["encode", "--config", path.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(read(&a, "profile.csv"), read(&b, "profile.csv"));
}

#[test]
fn bad_input_exits_with_one() {
    let o = mpsenc(&[
        "encode", "--dist", "cauchy", "--scale", "1", "-L", "5", "-n", "8",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown distribution"));

    let cfg = tmp("unknown-field");
    std::fs::create_dir_all(&cfg).unwrap();
    let path = cfg.join("run.json");
    std::fs::write(
        &path,
        r#"{"version":1,"distribution":{"kind":"levy","scale":1.0,"L":5.0},"n_qubits":8,"colour":"red"}"#,
    )
    .unwrap();
    assert_eq!(
        mpsenc(&["encode", "--config", path.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(mpsenc(&["reproduce", "fig3"]).status.code(), Some(1));
}

#[test]
fn failed_validation_exits_with_two() {
    // A threshold above every bond weight leaves an empty circuit, i.e. the uniform density.
    let out = tmp("fail");
    let o = mpsenc(&[
        "validate",
        "--dist",
        "normal",
        "--mu",
        "0.5",
        "--scale",
        "0.05",
        "-L",
        "1",
        "-n",
        "8",
        "--eps-trunc",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["cnots"], 0);
}

#[test]
fn reproduce_prints_one_line_per_check() {
    let out = tmp("reproduce");
    let o = mpsenc(&["reproduce", "fig5", "--out", out.to_str().unwrap()]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().all(|l| l.starts_with("PASS fig5 ")));
    assert!(out.join("fig5").join("summary.json").exists());
    assert!(out.join("fig5").join("fig5_levy.csv").exists());
}
