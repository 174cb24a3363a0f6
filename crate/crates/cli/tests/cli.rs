use std::path::Path;
use std::process::{Command, Output};

use pepscan_core::limit::LimitResult;
use pepscan_core::pipeline::RoiComparison;
use pepscan_core::Config;
use tempfile::TempDir;

fn pepscan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pepscan"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env_remove("PEPSCAN_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn bundled_config_parses() {
    let text = include_str!("../../../configs/published.toml");
    let config = Config::from_toml_str(text).unwrap();
    assert_eq!(config.published, Default::default());
    assert_eq!(config.analysis.detectors, vec![0, 1, 2, 3, 4, 5]);
}

#[test]
fn reproduce_command_passes() {
    let dir = TempDir::new().unwrap();
    let o = pepscan(dir.path(), &["reproduce-paper"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("4.2e-29"), "{out}");
    assert!(out.contains("41 +/- 66"), "{out}");
    assert!(out.contains("PASS"));
    let file = std::fs::read_to_string(dir.path().join("reproduce.txt")).unwrap();
    assert_eq!(file, out);
}

#[test]
fn reproduce_command_fails_at_lower_current() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "[published]\ncurrent_a = 40.0\n");
    let o = pepscan(dir.path(), &["--config", &config, "reproduce-paper"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("current_a"), "{out}");
    assert!(out.contains("FAIL"));
    assert_eq!(stderr(&o).lines().filter(|l| l.starts_with("error")).count(), 1);
}

#[test]
fn zero_efficiency_is_a_domain_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "[published]\nefficiency = 0.0\n");
    let o = pepscan(dir.path(), &["--config", &config, "reproduce-paper"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let config = write_config(dir.path(), "[efficiency]\nvalue = 0.0\n");
    let o = pepscan(dir.path(), &["--config", &config, "project"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.toml");
    let o = pepscan(dir.path(), &["--config", missing.to_str().unwrap(), "reproduce-paper"]);
    assert_eq!(o.status.code(), Some(2));
    let o = pepscan(dir.path(), &["simulate"]);
    assert_eq!(o.status.code(), Some(2), "no seed");
    let o = pepscan(dir.path(), &["efficiency"]);
    assert_eq!(o.status.code(), Some(2), "no seed");
    let o = pepscan(dir.path(), &["calibrate", "--input", "nowhere.vip2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = pepscan(dir.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let o = pepscan(dir.path(), &["--seed", "1", "simulate", "--on-days", "0.5", "--off-days", "0.5"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for name in ["on.vip2", "off.vip2", "on_generation.txt", "off_generation.txt"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn injected_signal_is_detected_and_limit_matches_library() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = pepscan(d, &["--seed", "7", "simulate", "--inject", "1e-27", "--on-days", "2", "--off-days", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let on = d.join("on.vip2");
    let off = d.join("off.vip2");
    let o = pepscan(d, &["analyze", "--on", on.to_str().unwrap(), "--off", off.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let analysis: RoiComparison<f64> = toml::from_str(&std::fs::read_to_string(d.join("analysis.toml")).unwrap()).unwrap();
    let sig = analysis.subtraction.significance();
    assert!(sig > 5.0, "excess only {sig} sigma");

    let analysis_path = d.join("analysis.toml");
    let o = pepscan(d, &["limit", "--analysis", analysis_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    #[derive(serde::Deserialize)]
    struct LimitFile {
        limit: LimitResult<f64>,
    }
    let file: LimitFile = toml::from_str(&std::fs::read_to_string(d.join("limit.toml")).unwrap()).unwrap();
    let config = Config::from_toml_str(include_str!("../../../configs/published.toml")).unwrap();
    let direct = analysis.limit(&config.constants, config.efficiency.value, &config.analysis).unwrap();
    assert_eq!(file.limit, direct);
}

#[test]
fn calibrate_and_efficiency_write_artifacts() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = pepscan(d, &["--seed", "3", "simulate", "--on-days", "1", "--off-days", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let on = d.join("on.vip2");
    let o = pepscan(d, &["calibrate", "--input", on.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("OK"));
    for name in ["calibration.toml", "calibration.txt", "raw_spectrum.txt"] {
        assert!(d.join(name).is_file(), "{name}");
    }

    let o = pepscan(d, &["--seed", "3", "--workers", "2", "efficiency", "--samples", "20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(d.join("efficiency.toml").is_file());
    let o = pepscan(d, &["--seed", "3", "efficiency", "--samples", "10"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn truncated_run_file_is_rejected() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = pepscan(d, &["--seed", "4", "simulate", "--on-days", "0.2", "--off-days", "0.2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let on = d.join("on.vip2");
    let bytes = std::fs::read(&on).unwrap();
    std::fs::write(&on, &bytes[..bytes.len() - 5]).unwrap();
    let o = pepscan(d, &["calibrate", "--input", on.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
