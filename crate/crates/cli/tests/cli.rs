use std::path::Path;
use std::process::{Command, Output};

use craft_core::retarget::{write_keypoint_stream, SyntheticHand};
use craft_core::sim::{TestKind, TestReport};
use serde_json::Value;

fn craft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_craft"))
        .args(args)
        .env_remove("CRAFT_SPEC")
        .output()
        .expect("binary runs")
}

fn last_line(bytes: &[u8]) -> Value {
    let text = String::from_utf8_lossy(bytes);
    serde_json::from_str(text.lines().last().expect("some output")).expect("json line")
}

fn sweep_file(dir: &Path) -> String {
    let path = dir.join("sweep.jsonl");
    let frames = SyntheticHand::default().calibration_sweep(60, 30.0);
    write_keypoint_stream(std::fs::File::create(&path).unwrap(), &frames).unwrap();
    path.display().to_string()
}

#[test]
fn unknown_grasp_exits_2_and_lists_names() {
    let out = craft(&["grasp", "Not A Grasp"]);
    assert_eq!(out.status.code(), Some(2));
    let err = last_line(&out.stderr);
    assert_eq!(err["error"], "unknown_grasp");
    let valid = err["detail"]["valid"].as_array().unwrap();
    assert_eq!(valid.len(), 33);
    assert!(valid.iter().any(|v| v == "Large Diameter"));
}

#[test]
fn grasp_settles_on_the_virtual_hand() {
    let out = craft(&["grasp", "Large Diameter"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = last_line(&out.stderr);
    assert_eq!(s["settled"], true);
    assert!(s["max_error_rad"].as_f64().unwrap() < 5e-3);
}

#[test]
fn test_pullout_writes_a_verifiable_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pullout.jsonl");
    let out = craft(&["test", "pullout", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let report = TestReport::read_from(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(report.kind, TestKind::Pullout);
    assert!(report.get("tendon.pullout_force_n") > report.get("direct.pullout_force_n"));
}

#[test]
fn test_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hold.toml");
    std::fs::write(&cfg, "mass_kg = 0.0\nduration_s = 10.0\n").unwrap();
    let out = craft(&["test", "hold", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = last_line(&out.stderr);
    assert_eq!(s["summary"]["tendon.mean_total_current_ma"], 0.0);
}

#[test]
fn bad_spec_path_gives_an_error_line() {
    let out = craft(&["--spec", "/nonexistent/spec.toml", "grasp", "Stick"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(last_line(&out.stderr)["error"], "spec");
}

#[test]
fn spec_path_can_come_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_craft"))
        .args(["grasp", "Stick"])
        .env("CRAFT_SPEC", "/nonexistent/spec.toml")
        .output()
        .unwrap();
    assert_eq!(last_line(&out.stderr)["error"], "spec");
}

#[test]
fn calibrate_record_and_replay_twice() {
    let dir = tempfile::tempdir().unwrap();
    let frames = sweep_file(dir.path());
    let profile = dir.path().join("profile.toml");
    let session = dir.path().join("s.session");
    let p = profile.to_str().unwrap();
    let out = craft(&["calibrate", "--operator", &frames, "--out", p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = craft(&["record", "--input", &frames, "--profile", p, "--out", session.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let logs: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let log = dir.path().join(format!("log{i}.jsonl"));
            let out = craft(&["replay", session.to_str().unwrap(), "--profile", p, "--out", log.to_str().unwrap()]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            assert_eq!(last_line(&out.stderr)["matches_recording"], true);
            std::fs::read(log).unwrap()
        })
        .collect();
    assert!(!logs[0].is_empty());
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn replay_with_another_profile_fails() {
    let dir = tempfile::tempdir().unwrap();
    let frames = sweep_file(dir.path());
    let session = dir.path().join("s.session");
    let out = craft(&["record", "--input", &frames, "--out", session.to_str().unwrap()]);
    assert!(out.status.success());
    let profile = dir.path().join("other.toml");
    let out = craft(&["calibrate", "--operator", &frames, "--out", profile.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&profile).unwrap();
    assert!(text.contains("ema_alpha = 0.3"));
    std::fs::write(&profile, text.replace("ema_alpha = 0.3", "ema_alpha = 0.5")).unwrap();
    let out = craft(&["replay", session.to_str().unwrap(), "--profile", profile.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(last_line(&out.stderr)["error"], "core");
}

#[test]
fn calibrate_robot_recovers_spec_limits() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("robot.toml");
    let out = craft(&["calibrate", "--robot", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let profile = craft_core::retarget::CalibrationProfile::load(&path).unwrap();
    let spec = craft_core::HandSpec::default();
    for (k, [lo, hi]) in profile.robot_limits.iter().enumerate() {
        let [a, b] = spec.limits(craft_core::JointId::from_active_index(k));
        assert!((lo - a).abs() < 5e-3 && (hi - b).abs() < 5e-3, "joint {k}: [{lo}, {hi}] vs [{a}, {b}]");
    }
}

#[test]
fn calibrate_without_a_source_is_a_usage_error() {
    let out = craft(&["calibrate", "--out", "/tmp/never.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sim_runs_for_a_fixed_duration() {
    let out = craft(&["sim", "--bind", "127.0.0.1:0", "--duration", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let listening: Value = serde_json::from_slice(out.stdout.split(|&b| b == b'\n').next().unwrap()).unwrap();
    assert!(listening["listening"].as_str().unwrap().starts_with("127.0.0.1:"));
    assert!(last_line(&out.stderr)["ticks"].as_u64().unwrap() >= 5);
}
