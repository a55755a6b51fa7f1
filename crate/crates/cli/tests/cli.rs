//! End-to-end tests of the `pditomo` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pditomo_core::aperture::SlitGeometry;
use pditomo_core::field::GridSpec;
use pditomo_core::harness::io::read_records_csv;
use pditomo_core::harness::ExperimentConfig;
use pditomo_core::qudit;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pditomo")
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(bin()).args(args).current_dir(cwd).output().expect("binary runs")
}

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::experiment_default();
    cfg.grid = GridSpec { width_px: 192, height_px: 192, pitch_um: 43.0 };
    cfg.geometry = SlitGeometry {
        d: 4,
        slit_width_a_px: 4,
        slit_separation_s_px: 6,
        slit_length_l_px: 120,
        pupil_radius_r_px: 72.0,
        center_offset_px: (0, 0),
    };
    cfg.dimension_d = 4;
    cfg.ensemble_size = 3;
    cfg.base_seed = 99;
    cfg
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    small_config().save(&path).unwrap();
    path
}

#[test]
fn simulate_writes_records_stats_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path());
    let out = run(
        &[
            "simulate",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out-dir",
            "out",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let records = read_records_csv(&dir.path().join("out/records.csv")).unwrap();
    assert_eq!(records.len(), 3);
    for r in &records {
        assert!(r.fidelity_uncorrected >= 0.999);
        assert!(r.fidelity_corrected.is_none());
    }
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/stats.json")).unwrap())
            .unwrap();
    assert_eq!(stats["uncorrected"]["count"], 3);
    assert!(stats["corrected"].is_null());
    // the effective config is persisted alongside the outputs
    assert!(ExperimentConfig::load(&dir.path().join("out/config.json")).is_ok());
}

#[test]
fn simulate_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path());
    let out = run(
        &[
            "simulate",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out-dir",
            "out",
            "--ensemble-size",
            "5",
            "--base-seed",
            "123",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let records = read_records_csv(&dir.path().join("out/records.csv")).unwrap();
    assert_eq!(records.len(), 5);
    let persisted = ExperimentConfig::load(&dir.path().join("out/config.json")).unwrap();
    assert_eq!(persisted.ensemble_size, 5);
    assert_eq!(persisted.base_seed, 123);
}

#[test]
fn saved_frames_reconstruct_to_the_recorded_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path());
    let out = run(
        &[
            "simulate",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out-dir",
            "out",
            "--ensemble-size",
            "1",
            "--save-frames",
            "f64",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // via --set-dir
    let out = run(
        &[
            "reconstruct",
            "--config",
            cfg_path.to_str().unwrap(),
            "--set-dir",
            "out/trial_0000",
            "--state-out",
            "state.json",
            "--phase-out",
            "phase.grid",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let state = pditomo_core::harness::io::load_state_json(&dir.path().join("state.json")).unwrap();
    assert_eq!(state.dimension(), 4);

    // the reconstructed state matches the trial's true state
    let cfg = small_config();
    let trial_seed = pditomo_core::seeds::trial_seed(cfg.base_seed, 0);
    let state_seed = pditomo_core::seeds::substream(trial_seed, pditomo_core::seeds::label::STATE);
    let truth = qudit::haar_random(4, state_seed).unwrap();
    let f = qudit::fidelity(&truth, &state).unwrap();
    assert!(f >= 0.999, "fidelity vs recorded truth {f}");

    // via explicit frame files
    let out = run(
        &[
            "reconstruct",
            "--config",
            cfg_path.to_str().unwrap(),
            "--frames",
            "out/trial_0000/frame_000.grid",
            "out/trial_0000/frame_001.grid",
            "out/trial_0000/frame_002.grid",
            "out/trial_0000/frame_003.grid",
            "--state-out",
            "state2.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let state2 =
        pditomo_core::harness::io::load_state_json(&dir.path().join("state2.json")).unwrap();
    assert_eq!(state.coefficients(), state2.coefficients());
    assert!(dir.path().join("phase.grid").exists());
}

#[test]
fn screens_emits_structure_function_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path());
    let out = run(
        &[
            "screens",
            "--config",
            cfg_path.to_str().unwrap(),
            "--count",
            "5",
            "--out-dir",
            "screens",
            "--sf-csv",
            "sf.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sf.csv")).unwrap();
    assert!(csv.starts_with("separation_m,d_rad2,kolmogorov_rad2,samples"));
    assert!(csv.lines().count() > 3);
    assert!(dir.path().join("screens/screen_0000.grid").exists());
    let loaded =
        pditomo_core::harness::io::load_real_grid(&dir.path().join("screens/screen_0000.grid"))
            .unwrap();
    assert_eq!(loaded.width(), 192);
}

#[test]
fn missing_input_yields_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--config", "no_such_file.json"], dir.path());
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let v: serde_json::Value = serde_json::from_str(stderr.trim()).expect("JSON error object");
    assert!(v["error"].is_string());

    let out = run(&["reconstruct"], dir.path());
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let v: serde_json::Value = serde_json::from_str(stderr.trim()).expect("JSON error object");
    assert!(v["error"].as_str().unwrap().contains("frames"));
}

#[test]
fn selftest_subcommand_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["selftest"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "stdout: {stdout}");
    assert!(stdout.contains("[PASS]"));
    assert!(!stdout.contains("[FAIL]"));
    assert!(stdout.contains("all selftest suites passed"));
}
