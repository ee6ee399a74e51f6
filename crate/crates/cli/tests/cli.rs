// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use coop_sdn_cli::{EXIT_IO, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION};

fn coop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coop-sdn")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn fig3_yaml() -> String {
    coop_sdn_core::scenario::presets::scenario_source("geni-fig3").unwrap().to_owned()
}

#[test]
fn validate_accepts_preset_source() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "fig3.yaml", &fig3_yaml());
    let out = coop(&["validate", &path]);
    assert_eq!(code(&out), EXIT_OK, "{}", stderr(&out));
    assert_eq!(stdout(&out), format!("{path}: ok\n"));
}

#[test]
fn invalid_trials_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fig3_yaml().replace("trials: 10", "trials: 0");
    assert!(text.contains("trials: 0"));
    let path = write(dir.path(), "bad.yaml", &text);
    let out = coop(&["validate", &path]);
    assert_eq!(code(&out), EXIT_VALIDATION);
    assert!(stderr(&out).contains("trials"), "{}", stderr(&out));
}

#[test]
fn type_errors_name_the_field_once() {
    let dir = tempfile::tempdir().unwrap();
    let text = fig3_yaml().replace("      agent: true\n", "      agent: maybe\n");
    let path = write(dir.path(), "bad.yaml", &text);
    let out = coop(&["validate", &path]);
    assert_eq!(code(&out), EXIT_VALIDATION);
    assert_eq!(stderr(&out).matches("topology.hosts[0].agent").count(), 1, "{}", stderr(&out));
}

#[test]
fn malformed_yaml_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.yaml", "topology: [unclosed\n");
    assert_eq!(code(&coop(&["run", "--config", &path])), EXIT_VALIDATION);
}

#[test]
fn unknown_flag_is_a_validation_error() {
    assert_eq!(code(&coop(&["run", "--preset", "geni-fig3", "--bogus"])), EXIT_VALIDATION);
}

#[test]
fn missing_file_is_an_io_error() {
    let out = coop(&["run", "--config", "/nonexistent/scenario.yaml"]);
    assert_eq!(code(&out), EXIT_IO);
}

#[test]
fn time_limit_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{}\ntime_limit_ms: 100\n", fig3_yaml());
    let path = write(dir.path(), "short.yaml", &text);
    let out = coop(&["run", "--config", &path]);
    assert_eq!(code(&out), EXIT_RUNTIME, "{}", stderr(&out));
}

#[test]
fn run_prints_csv_metrics() {
    let out = coop(&["run", "--preset", "geni-fig3", "--trials", "2"]);
    assert_eq!(code(&out), EXIT_OK, "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,trial,value_ms"));
    assert!(text.contains("total_time_net1,0,566\n"));
    assert!(text.contains("total_time_net2,1,1002\n"));
}

#[test]
fn structured_output_parses() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.yaml");
    let out = coop(&[
        "run",
        "--preset",
        "geni-fig3",
        "--trials",
        "3",
        "--format",
        "structured",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), EXIT_OK, "{}", stderr(&out));
    let report: serde_yaml::Value = serde_yaml::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["trials"].as_u64(), Some(3));
    assert_eq!(report["profile"].as_str(), Some("geni"));
    assert!(stdout(&out).contains("total_time_net1"));
}

#[test]
fn output_is_byte_stable() {
    let a = coop(&["run", "--preset", "geni-fig3", "--seed", "11"]);
    let b = coop(&["run", "--preset", "geni-fig3", "--seed", "11"]);
    assert_eq!(a.stdout, b.stdout);
    let a = coop(&["trace", "--preset", "geni-fig3", "--seed", "11", "--full"]);
    let b = coop(&["trace", "--preset", "geni-fig3", "--seed", "11", "--full"]);
    assert_eq!(code(&a), EXIT_OK);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn parallel_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    let par = dir.path().join("par");
    for (trace_dir, extra) in [(&seq, None), (&par, Some("--parallel"))] {
        let mut args = vec!["run", "--preset", "geni-fig3", "--trace-dir", trace_dir.to_str().unwrap()];
        args.extend(extra);
        let out = coop(&args);
        assert_eq!(code(&out), EXIT_OK, "{}", stderr(&out));
        std::fs::write(trace_dir.join("metrics.csv"), &out.stdout).unwrap();
    }
    let mut names: Vec<_> = std::fs::read_dir(&seq).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 11);
    for name in names {
        assert_eq!(std::fs::read(seq.join(&name)).unwrap(), std::fs::read(par.join(&name)).unwrap());
    }
}

#[test]
fn timeline_has_one_alert_and_one_share() {
    let out = coop(&["trace", "--preset", "geni-fig3"]);
    assert_eq!(code(&out), EXIT_OK);
    let text = stdout(&out);
    assert_eq!(text.matches(" ALERT ").count(), 1, "{text}");
    assert_eq!(text.matches(" PEER_SHARE ").count(), 1, "{text}");
    assert!(text.contains("1002.000ms"));
}

#[test]
fn zero_profile_collapses_timeline() {
    let out = coop(&["trace", "--preset", "geni-fig3", "--profile", "zero"]);
    assert_eq!(code(&out), EXIT_OK);
    let text = stdout(&out);
    let entries: Vec<&str> = text.lines().skip(1).collect();
    assert!(!entries.is_empty());
    assert!(entries.iter().all(|l| l.trim_start().starts_with("0.000ms")), "{text}");
}

#[test]
fn wrong_passcode_blocks_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let text = fig3_yaml().replace("      agent: true\n", "      agent: true\n      corrupt_passcode: true\n");
    assert!(text.contains("corrupt_passcode"));
    let path = write(dir.path(), "corrupt.yaml", &text);
    let out = coop(&["trace", "--config", &path]);
    assert_eq!(code(&out), EXIT_OK, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("alert rejected"), "{text}");
    assert!(!text.contains("drop install"), "{text}");
    assert!(!text.contains("PEER_SHARE"), "{text}");
}

#[test]
fn udp_transport_matches_memory() {
    let memory = coop(&["trace", "--preset", "geni-fig3", "--full"]);
    let udp = coop(&["trace", "--preset", "geni-fig3", "--full", "--transport", "udp"]);
    assert_eq!(code(&udp), EXIT_OK, "{}", stderr(&udp));
    assert_eq!(memory.stdout, udp.stdout);
}
