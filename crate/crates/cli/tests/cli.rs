use std::path::Path;
use std::process::{Command, Output};

use arnold_stab::output::Table;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arnold-stab")).args(args).arg("--out").arg(out).output().unwrap()
}

#[test]
fn unknown_flag_and_key_exit_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["gen", "--colour", "red"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "res = 16\ncolour = red\n").unwrap();
    let o = run(&["gen", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["gen", "--res", "4"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "too coarse is a configuration error");
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# reference\nres = 12\nrin = 1\nrout = 2\n").unwrap();
    let o = run(&["gen", "--config", cfg.to_str().unwrap(), "--res", "16"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["res"], "16");
    assert_eq!(m["command"], "gen");
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["seeds"][0], 42);
}

#[test]
fn spectra_reports_reciprocity() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["spectra", "--domain", "annulus", "--rin", "1", "--rout", "2", "--res", "32"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = Table::read(&tmp.path().join("criterion.csv")).unwrap();
    assert!(t.column("lambda_Lambda_minus_1").unwrap()[0].abs() <= 1e-8);
    assert_eq!(t.rows[0][t.header.iter().position(|h| h == "satisfied").unwrap()], "true");
}

#[test]
fn resonant_profile_is_a_solver_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["steady", "--res", "12", "--kappa", "100"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn pipeline_with_field_files_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    assert_eq!(run(&["steady", "--res", "12"], p).status.code(), Some(0));
    let steady = Table::read(&p.join("steady.csv")).unwrap();
    assert_eq!(steady.rows[0][steady.header.iter().position(|h| h == "certified").unwrap()], "true");
    let omega = p.join("omega_bar.sfld");
    let o = run(&["stream", "--res", "12", "--omega", omega.to_str().unwrap()], p);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["functional", "--res", "12"], p);
    assert_eq!(o.status.code(), Some(0));
    let f = Table::read(&p.join("functional.csv")).unwrap();
    assert_eq!(f.rows.len(), 7);
    assert_eq!(run(&["probe", "--res", "12", "--samples", "10"], p).status.code(), Some(0));
    let probe = Table::read(&p.join("probe.csv")).unwrap();
    assert_eq!(probe.rows.len(), 10);
    let o = run(&["simulate", "--res", "12", "--turnovers", "0.5", "--mode", "swap"], p);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(Table::read(&p.join("series.csv")).unwrap().rows.len() >= 2);
    assert_eq!(run(&["report"], p).status.code(), Some(0));
    assert!(std::fs::read_to_string(p.join("series_energy.svg")).unwrap().starts_with("<svg"));
    assert!(p.join("probe.svg").exists());
    assert_eq!(run(&["oracle", "--res", "12"], p).status.code(), Some(0));
}

#[test]
fn mask_domain_from_run_length_text() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    let mut rows = vec!["rle 20 20".to_string()];
    for r in 0..20 {
        rows.push(if (7..13).contains(&r) { "7o6x7o".into() } else { "20o".into() });
    }
    let mask = p.join("mask.txt");
    std::fs::write(&mask, rows.join("\n")).unwrap();
    let o = run(&["harmonic", "--domain", "mask", "--mask", mask.to_str().unwrap(), "--h", "0.05"], p);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let pq = Table::read(&p.join("pq.csv")).unwrap();
    assert!(pq.column("p").unwrap()[0] > 0.0);
    let o = run(&["oracle", "--domain", "mask", "--mask", mask.to_str().unwrap(), "--h", "0.05"], p);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_cap_is_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_arnold-stab"))
        .args(["gen", "--res", "12", "--out"])
        .arg(tmp.path())
        .env("ARNOLD_STAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
