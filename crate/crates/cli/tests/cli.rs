use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use modmirror::calibration::lorentzian_transmission;
use modmirror::config::SceneConfig;
use modmirror::mhz_to_angular;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_modmirror");

const TWO_QUBIT: &str = r#"{
  "qubits": [
    {"f0_mhz": 6000.0, "gamma1_mhz": 4.4, "gamma2_mhz": 3.9, "am_mhz": 30.0, "alpha_over_pi": 0.0},
    {"f0_mhz": 6000.0, "gamma1_mhz": 4.4, "gamma2_mhz": 4.3, "am_mhz": 30.0, "alpha_over_pi": 0.5}
  ],
  "phi_over_pi": 0.5,
  "drive": {"f_mhz": 5990.0, "rabi_mhz": 0.0, "port": "left"},
  "modulation": {"omega_mhz": 20.0}
}"#;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("MODMIRROR_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn sidebands_csv_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "two_qubit.json", TWO_QUBIT);
    let out = tmp.path().join("out");
    let o = run(&["sidebands", "--config", cfg.to_str().unwrap(), "--nmax", "auto"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let text = fs::read_to_string(out.join("sidebands.csv")).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,re_r,im_r,re_t,im_t");
    let n_max = (lines.len() - 2) / 2;
    assert_eq!(lines.len(), 2 * n_max + 2);
    assert!(lines[1].starts_with(&format!("-{n_max},")));
    for line in &lines[1..] {
        for field in line.split(',').skip(1) {
            assert!(field.contains('e'), "{field}");
            field.parse::<f64>().unwrap();
        }
    }

    let m = manifest(&out);
    assert_eq!(m["subcommand"], "sidebands");
    assert_eq!(m["solver_tier"], "floquet");
    assert_eq!(m["grid_shapes"]["orders"][0], 2 * n_max + 1);
    assert_eq!(m["outputs"][0], "sidebands.csv");
    assert!(m["wall_clock_s"].as_f64().unwrap() >= 0.0);
    assert!(m["code_version"].is_string());
}

#[test]
fn manifest_config_revalidates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "two_qubit.json", TWO_QUBIT);
    let o = run(&["sidebands", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0);
    let m = manifest(tmp.path());
    let resolved = SceneConfig::from_json(&m["config"].to_string()).unwrap();
    assert_eq!(resolved, SceneConfig::from_json(TWO_QUBIT).unwrap());
    resolved.to_scene().unwrap();
}

#[test]
fn map_output_is_independent_of_workers_and_reruns_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["map", "--alpha-steps", "7", "--detuning-steps", "9", "--sideband", "-1", "--sideband", "1"];
    let mut runs = Vec::new();
    for k in ["1", "3"] {
        let out = tmp.path().join(format!("w{k}"));
        let mut a = args.to_vec();
        a.extend(["--workers", k]);
        let o = run(&a, &out);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(out);
    }
    let rerun = tmp.path().join("rerun");
    let o = run(&["rerun", runs[1].join("manifest.json").to_str().unwrap(), "--workers", "2"], &rerun);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let files = ["map_n-1.csv", "map_n1.csv", "cut_n-1.csv", "cut_n1.csv"];
    for f in files {
        let a = fs::read(runs[0].join(f)).unwrap();
        assert_eq!(a, fs::read(runs[1].join(f)).unwrap(), "{f} depends on workers");
        assert_eq!(a, fs::read(rerun.join(f)).unwrap(), "{f} differs on rerun");
    }
    let header = fs::read_to_string(runs[0].join("map_n-1.csv")).unwrap();
    assert!(header.starts_with("alpha_over_pi,detuning_mhz,p_fwd,p_bwd,directivity\n"));
    assert_eq!(header.lines().count(), 1 + 7 * 9);

    let m = manifest(&rerun);
    assert_eq!(m["subcommand"], "map");
    assert_eq!(m["grid_shapes"]["map"], serde_json::json!([7, 9]));
}

#[test]
fn workers_default_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args(["gyrator", "--scan", "-10:10:3", "--out"])
        .arg(tmp.path())
        .env("MODMIRROR_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(manifest(tmp.path())["workers"], 2);
}

#[test]
fn validation_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = write(tmp.path(), "empty.json", r#"{"qubits":[],"drive":{"f_mhz":1},"modulation":{"omega_mhz":1}}"#);
    let unknown = write(tmp.path(), "unknown.json", &TWO_QUBIT.replace("\"phi_over_pi\"", "\"phi\""));
    let negative = write(tmp.path(), "neg.json", &TWO_QUBIT.replace("\"gamma1_mhz\": 4.4", "\"gamma1_mhz\": -4.4"));
    let out = tmp.path().join("out");
    let cases: Vec<Vec<&str>> = vec![
        vec!["sidebands", "--config", empty.to_str().unwrap()],
        vec!["sidebands", "--config", unknown.to_str().unwrap()],
        vec!["sidebands", "--config", negative.to_str().unwrap()],
        vec!["sidebands", "--config", "/nonexistent/scene.json"],
        vec!["sidebands", "--nmax", "many"],
        vec!["single-qubit", "--sweep", "1:2"],
        vec!["isolator", "--workers", "0"],
        vec!["map", "--alpha-steps", "0"],
        vec!["fit", "modulation", "--spectrum", "/nonexistent.csv"],
    ];
    for args in cases {
        let o = run(&args, &out);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn solver_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["sidebands", "--tier", "lindblad", "--nmax", "1"], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Rabi"));
    assert!(!tmp.path().join("manifest.json").exists());
}

#[test]
fn single_qubit_matches_lorentzian_without_modulation() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["single-qubit", "--am-mhz", "0", "--sweep", "6060:6200:281"], tmp.path());
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(tmp.path().join("single_qubit.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 281);
    let (w0, g1, g2) = (mhz_to_angular(6130.0), mhz_to_angular(4.4), mhz_to_angular(3.9));
    for r in rows {
        let expect = lorentzian_transmission(mhz_to_angular(r[0]), w0, g1, g2);
        assert!((r[3] - expect).abs() < 1e-12, "{} {} {}", r[0], r[3], expect);
    }
}

#[test]
fn fit_subcommands_recover_synthetic_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let (w0, g1, g2) = (mhz_to_angular(6130.0), mhz_to_angular(4.4), mhz_to_angular(3.9));
    let mut spectrum = String::from("freq_mhz,power\n");
    for i in 0..401 {
        let f = 6090.0 + 0.2 * i as f64;
        spectrum.push_str(&format!("{f},{:e}\n", lorentzian_transmission(mhz_to_angular(f), w0, g1, g2)));
    }
    let sp = write(tmp.path(), "spectrum.csv", &spectrum);
    let pairs = write(tmp.path(), "pairs.csv", "av_vpp,am_mhz\n0.1,15.2\n0.2,30.2\n0.3,45.2\n");

    let out = tmp.path().join("q");
    let o = run(&["fit", "qubit", "--spectrum", sp.to_str().unwrap()], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fit: Value = serde_json::from_str(&fs::read_to_string(out.join("fit_qubit.json")).unwrap()).unwrap();
    for (key, truth) in [("f0_mhz", 6130.0), ("gamma1_mhz", 4.4), ("gamma2_mhz", 3.9)] {
        let v = fit[key]["value"].as_f64().unwrap();
        assert!((v - truth).abs() < 1e-6 * truth, "{key}: {v}");
    }
    assert!(fs::read_to_string(out.join("fit_qubit.csv")).unwrap().starts_with("parameter,value,ci95\n"));

    let out = tmp.path().join("c");
    let o = run(&["fit", "calibration", "--pairs", pairs.to_str().unwrap()], &out);
    assert_eq!(code(&o), 0);
    let fit: Value = serde_json::from_str(&fs::read_to_string(out.join("fit_calibration.json")).unwrap()).unwrap();
    assert!((fit["slope_mhz_per_vpp"].as_f64().unwrap() - 150.0).abs() < 1e-9);
    assert!((fit["intercept_mhz"].as_f64().unwrap() - 0.2).abs() < 1e-9);

    let flat = write(tmp.path(), "flat.csv", "av_vpp,am_mhz\n0.1,1\n0.1,2\n");
    let o = run(&["fit", "calibration", "--pairs", flat.to_str().unwrap()], &tmp.path().join("f"));
    assert_eq!(code(&o), 2);
}

#[test]
fn gyrator_and_isolator_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["gyrator", "--sideband", "1", "--scan", "-20:20:5"], tmp.path());
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(tmp.path().join("gyrator.csv")).unwrap();
    for line in text.lines().skip(1) {
        let phase: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((phase - 1.0).abs() < 1e-9, "{line}");
    }

    let o = run(&["isolator", "--sideband", "-1", "--alpha-steps", "5"], tmp.path());
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(tmp.path().join("isolator.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    // α → −α swaps the two directions.
    assert!((rows[1][3] + rows[3][3]).abs() < 1e-9);
    assert!(rows[2][3].abs() < 1e-9);
}

#[test]
fn driven_subcommands_write_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let one = write(
        tmp.path(),
        "one.json",
        r#"{"qubits":[{"f0_mhz":6000,"gamma1_mhz":4.4,"gamma2_mhz":3.9,"am_mhz":10}],"drive":{"f_mhz":6000,"rabi_mhz":10},"modulation":{"omega_mhz":20}}"#,
    );
    let cases: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (vec!["psd", "--config", one.to_str().unwrap(), "--detection", "-40:40:5"], vec!["psd.csv", "psd_lines.csv"]),
        (vec!["power-map", "--log-power", "-1:1:2", "--detuning", "-5:5:2", "--nmax", "2"], vec!["power_map.csv"]),
        (vec!["mollow", "--omega-scan", "50:52:2", "--detection", "-60:60:5"], vec!["mollow.csv", "mollow_coherent.csv", "mollow_lines.csv"]),
    ];
    for (args, files) in cases {
        let out = tmp.path().join(args[0]);
        let o = run(&args, &out);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let m = manifest(&out);
        for f in files {
            assert!(out.join(f).exists(), "{f}");
            assert!(m["outputs"].as_array().unwrap().iter().any(|v| v == f));
        }
    }
}
