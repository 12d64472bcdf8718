use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hybridch::dump::SequenceDump;
use hybridch::protocols::detect_period;
use hybridch::{verify_discovery, WakeUpSchedule};

fn hybridch(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridch"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn gen_seq_dumps_jumpstay_with_detectable_period() {
    let dir = tempfile::tempdir().unwrap();
    let out = hybridch(&["gen-seq", "--base", "jumpstay", "--n", "5", "--id", "1", "--slots", "30"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    let dump = SequenceDump::parse(&text).unwrap();
    assert_eq!(dump.channels.len(), 30);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 30);
    assert_eq!(dump.period, Some(15));
    assert_eq!(detect_period(&dump.to_sequence().unwrap(), 15), Some(15));
    // The resolved configuration goes to stderr, not into the dump.
    assert!(String::from_utf8_lossy(&out.stderr).contains("base = \"jumpstay\""));
}

#[test]
fn gen_schedule_emits_a_discovering_bit_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = hybridch(&["gen-schedule", "--period", "14", "--duty", "13/14"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    let line = text.trim_end();
    assert_eq!(line.len(), 14);
    let x: WakeUpSchedule = line.parse().unwrap();
    assert_eq!(x.awake_count(), 13);
    assert!(verify_discovery(&x, &x).is_some());

    let file = dir.path().join("x.txt");
    std::fs::write(&file, &text).unwrap();
    let verified = hybridch(&["verify", "--schedule-file", file.to_str().unwrap()], dir.path());
    assert!(verified.status.success());
    assert!(stdout(&verified).contains("status: ok"));
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let infeasible = hybridch(&["gen-schedule", "--period", "14", "--duty", "4/14"], dir.path());
    assert_eq!(infeasible.status.code(), Some(3));
    let missing = hybridch(&["sweep", "--config", "no-such-file.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    let unknown = hybridch(&["gen-seq", "--frobnicate"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));
    let bad_base = hybridch(&["gen-seq", "--base", "nope", "--n", "5", "--slots", "3"], dir.path());
    assert_eq!(bad_base.status.code(), Some(2));
    let blind = hybridch(&["verify", "--schedule", "10"], dir.path());
    assert_eq!(blind.status.code(), Some(3));
}

#[test]
fn default_sweep_has_ten_rows_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_config();
    let args = ["sweep", "--config", cfg.to_str().unwrap(), "--trials", "10", "--out", "res"];
    let first = hybridch(&args, dir.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let csv = stdout(&first);
    assert_eq!(csv.lines().count(), 11, "header plus 5 duty cycles x 2 intensities");
    let second = hybridch(&args, dir.path());
    assert_eq!(first.stdout, second.stdout);
    let files: Vec<_> = std::fs::read_dir(dir.path().join("res")).unwrap().collect();
    assert_eq!(files.len(), 2, "csv and json, named by config hash");
}

#[test]
fn metrics_reports_json_for_a_hybrid_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = hybridch(
        &[
            "--seed", "3", "metrics", "--base", "jumpstay", "--n", "5", "--duty", "2/3", "--period", "3",
            "--adversarial", "--trials", "50",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    // Bound is τT = 15 * 3.
    let mttr = report["mttr"].as_u64().unwrap();
    assert!(mttr < 45);
    assert_eq!(report["per_drift"].as_array().unwrap().len(), 45);
}
