//! End-to-end checks of the binary's contract: exit codes by failure
//! class, emitted files re-parsing bit-exactly under the crate's own
//! readers, and the metadata sidecar.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qmult_cli::emit;

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qmult-surface-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qmult"));
    cmd.args(args);
    if let Some(path) = out {
        cmd.arg("--out").arg(path);
    }
    cmd.output().unwrap()
}

#[test]
fn usage_failures_exit_with_code_two() {
    let bad: [&[&str]; 6] = [
        &["gelfond", "--seq", "gtm:tau=1.5", "--Lmin", "4", "--Lmax", "6"],
        &["patterns", "--q", "3", "--Q", "4", "--k", "2", "--residues", "0,1", "--N", "64"],
        &["patterns", "--q", "2", "--Q", "3", "--k", "2", "--residues", "0,1,2", "--N", "64"],
        &["norms", "--seq", "nosuch:x=1", "--s", "2", "--L", "4"],
        &["norms", "--seq", "tm", "--s", "7", "--L", "4"],
        &["gamma", "--seq", "tm", "--R", "4", "--method", "series"],
    ];
    for args in bad {
        let out = run(args, None);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(
            String::from_utf8_lossy(&out.stderr).starts_with("error: usage:"),
            "{args:?} stderr lacks the usage tag"
        );
    }
}

#[test]
fn exhausted_budgets_exit_with_code_three() {
    let out = run(
        &["norms", "--seq", "tm", "--s", "2", "--L", "20", "--mode", "brute", "--budget", "1000"],
        None,
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("budget"), "stderr does not mention the budget: {text}");
}

#[test]
fn emitted_csv_reparses_bit_exactly() {
    let dir = scratch_dir("csv");
    let out = dir.join("norms.csv");
    let res = run(&["norms", "--seq", "tm", "--s", "3", "--L", "6"], Some(&out));
    assert!(res.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let (columns, rows) = emit::read_csv(&text).expect("own csv must re-parse");
    assert_eq!(columns, ["s", "L", "method", "value", "error_bound"]);
    assert_eq!(rows.len(), 3);
    for row in &rows {
        // the value column must round-trip through f64 to the same bits
        let v: f64 = row[3].parse().unwrap();
        assert_eq!(emit::format_real(v), row[3]);
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn emitted_json_reparses_and_matches_csv_fields() {
    let dir = scratch_dir("json");
    let csv_out = dir.join("gamma.csv");
    let json_out = dir.join("gamma.json");
    let base = ["gamma", "--seq", "tm", "--R", "6", "--method", "finite:N=4096"];
    assert!(run(&base, Some(&csv_out)).status.success());
    let mut json_args = base.to_vec();
    json_args.extend(["--format", "json"]);
    assert!(run(&json_args, Some(&json_out)).status.success());

    let (ccols, crows) = emit::read_csv(&std::fs::read_to_string(&csv_out).unwrap()).unwrap();
    let (jcols, jrows) = emit::read_json(&std::fs::read_to_string(&json_out).unwrap()).unwrap();
    assert_eq!(ccols, jcols);
    assert_eq!(crows, jrows, "csv and json payloads must carry identical fields");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sidecar_records_the_config_and_its_hash() {
    let dir = scratch_dir("meta");
    let out = dir.join("cesaro.csv");
    let res = run(&["cesaro", "--seq", "gtm:tau=0.3", "--L", "5"], Some(&out));
    assert!(res.status.success());
    let meta_path = emit::sidecar_path(&out);
    let meta = std::fs::read_to_string(&meta_path).expect("sidecar written next to the data");
    let parsed: serde_json::Value = serde_json::from_str(&meta).unwrap();
    let config = parsed["config"].as_str().unwrap();
    let hash = parsed["config_hash"].as_str().unwrap();
    assert_eq!(hash, format!("{:016x}", emit::fnv1a64(config.as_bytes())));
    assert!(parsed["runtime_ms"].is_string());
    let threads: usize = parsed["threads"].as_str().unwrap().parse().unwrap();
    assert!(threads >= 1, "sidecar records the resolved worker count");
    // rerunning with the same config keeps the hash stable
    let res2 = run(&["cesaro", "--seq", "gtm:tau=0.3", "--L", "5"], Some(&out));
    assert!(res2.status.success());
    let meta2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&meta_path).unwrap()).unwrap();
    assert_eq!(meta2["config_hash"], parsed["config_hash"]);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn out_dir_env_var_redirects_default_outputs() {
    let dir = scratch_dir("envdir");
    let res = Command::new(env!("CARGO_BIN_EXE_qmult"))
        .args(["cesaro", "--seq", "tm", "--L", "4"])
        .env("QMULT_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(dir.join("cesaro.csv").is_file());
    assert!(dir.join("cesaro.csv.meta.json").is_file());
    std::fs::remove_dir_all(&dir).ok();
}
