//! End-to-end tests of the `aircomp` binary: subcommand output, CSV
//! determinism, manifest round-tripping, and config validation.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aircomp"))
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("aircomp-cli-tests")
        .join(format!("{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn write_small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.txt");
    std::fs::write(
        &path,
        "devices = 8\nantennas = 2\nbits = 4\nblock_dim = 2\nseq_len = 10\n\
         activity_ratio = 0.5\ntrials = 2\nblocks = 3\nfeature_dim = 10\n\
         classes = 3\ntrain_per_class = 32\ntest_per_class = 15\nbs_per_class = 15\n\
         center_scale = 0.8\nsnr_db = 20\n",
    )
    .unwrap();
    path
}

#[test]
fn overhead_prints_reference_rows() {
    let out = bin()
        .args(["overhead", "--w", "269722", "--q", "20", "--l", "20", "--k", "40", "--p", "1024"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("vq_ofdma,527"), "{text}");
    assert!(text.contains("fsk_mv,527"), "{text}");
    assert!(text.contains("obda,264"), "{text}");
    assert!(text.contains("md_aircomp,264"), "{text}");

    let out = bin()
        .args(["overhead", "--w", "269722", "--q", "20", "--l", "15", "--k", "40", "--p", "1024"])
        .output()
        .unwrap();
    assert!(stdout(&out).contains("md_aircomp,198"));
}

#[test]
fn detect_bench_is_deterministic_under_seed() {
    let dir = temp_dir("bench-det");
    let cfg = write_small_config(&dir);
    let run = |sub: &str| {
        let out_dir = dir.join(sub);
        let out = bin()
            .args(["--config", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()])
            .args(["detect-bench", "--snr", "20", "--trials", "2", "--seed", "9"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(out_dir.join("detect_bench.csv")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b, "same seed must produce identical CSV");
    assert!(a.starts_with("snr_db,trial,"), "{a}");
    assert_eq!(a.lines().count(), 3, "header + 2 trials");
}

#[test]
fn feel_zero_rounds_emits_header_only() {
    let dir = temp_dir("feel-zero");
    let cfg = write_small_config(&dir);
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()])
        .args(["feel", "--scheme", "ifed", "--rounds", "0"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("feel.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1);
    assert!(lines[0].starts_with("seed,scheme,round,test_accuracy"));
}

#[test]
fn feel_rows_match_schema_and_manifest_roundtrips() {
    let dir = temp_dir("feel-rows");
    let cfg = write_small_config(&dir);
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()])
        .args(["feel", "--scheme", "pa,mdaircomp", "--rounds", "2", "--seed", "4"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("feel.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 2, "header + 2 schemes x 2 rounds");
    let columns = lines[0].split(',').count();
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), columns, "ragged row: {line}");
    }

    // Final model weights are dumped alongside, one row per parameter.
    let weights = std::fs::read_to_string(dir.join("feel_weights.csv")).unwrap();
    assert!(weights.starts_with("seed,scheme,index,weight\n"));
    let w = 10 * 3 + 3; // feature_dim * classes + classes from the config
    assert_eq!(weights.lines().count(), 1 + 2 * w, "header + 2 schemes x W rows");

    // Manifest parses and re-emits byte-identically.
    let manifest_path = dir.join("feel.manifest.json");
    let text = std::fs::read_to_string(&manifest_path).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["command"], "feel");
    assert_eq!(value["seed"], 4);
    let mut re_emitted = serde_json::to_string_pretty(&value).unwrap();
    re_emitted.push('\n');
    assert_eq!(re_emitted, text);
}

#[test]
fn sweep_emits_one_row_per_cell() {
    let dir = temp_dir("sweep");
    let cfg = write_small_config(&dir);
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()])
        .args(["sweep", "--grid", "seq_len=8,12", "--grid", "antennas=1,2", "--trials", "1", "--seed", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4, "header + 2x2 cells");
    assert!(csv.contains("seq_len=8;antennas=1,"));
    assert!(csv.contains("seq_len=12;antennas=2,"));
}

#[test]
fn unknown_config_key_fails_with_nonzero_exit() {
    let dir = temp_dir("badcfg");
    let path = dir.join("bad.txt");
    std::fs::write(&path, "not_a_real_key = 1\n").unwrap();
    let out = bin()
        .args(["--config", path.to_str().unwrap()])
        .args(["overhead", "--w", "1", "--q", "1", "--l", "1", "--k", "1", "--p", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown config key"), "{err}");
}

#[test]
fn out_dir_env_variable_is_honored() {
    let dir = temp_dir("envdir");
    let cfg = write_small_config(&dir);
    let out = bin()
        .env("AIRCOMP_OUT_DIR", dir.to_str().unwrap())
        .args(["--config", cfg.to_str().unwrap()])
        .args(["detect-bench", "--snr", "20", "--trials", "1", "--seed", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("detect_bench.csv").exists());
}
