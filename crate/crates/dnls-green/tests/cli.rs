//! End-to-end runs of the binary against the bundled scenarios.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnls-green"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn verify_smoke_passes_with_json_report() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("smoke.cfg");
    let o = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(out.path(), "verify_report.json");
    assert_eq!(r["pass"], true);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    let checks = r["checks"].as_array().unwrap();
    assert!(checks.len() > 30);
    for c in checks {
        for key in ["name", "residual", "tolerance", "pass"] {
            assert!(c.get(key).is_some(), "{c}");
        }
    }
    let traj = std::fs::read_to_string(out.path().join("trajectory.csv")).unwrap();
    assert!(
        traj.starts_with("t,re_a(2),im_a(2),re_a(8),im_a(8),m,re_h,im_h,re_e,im_e,gauge_deviation")
    );
    assert_eq!(traj.lines().count(), 102);
}

#[test]
fn evolve_akappa_writes_trajectory() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("smoke.cfg");
    let o = run(&[
        "evolve",
        "--flow",
        "akappa",
        "--tau",
        "2",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = std::fs::read_to_string(out.path().join("trajectory.csv")).unwrap();
    assert!(traj
        .lines()
        .next()
        .unwrap()
        .starts_with("t,re_a(2),im_a(2),m"));
}

#[test]
fn sweep_writes_ratio_csv_and_reports_the_failing_row() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("sweep.cfg");
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    // the cubic remainder of g12/(2+gamma) breaks the uniformity proxy, so the exit is nonzero
    assert_eq!(o.status.code(), Some(1));
    let csv = std::fs::read_to_string(out.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("profile,amplitude,tau,g12_hs"));
    assert!(
        csv.lines().nth(1).unwrap().contains("NA"),
        "zero-amplitude rows are N/A"
    );
    let r = report(out.path(), "sweep_report.json");
    let failing: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failing, ["uniformity_et1_sob"]);
}

fn write_cfg(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("s.cfg");
    let smoke = std::fs::read_to_string(configs().join("smoke.cfg")).unwrap();
    std::fs::write(&p, body.replace("@SMOKE@", &smoke)).unwrap();
    p
}

#[test]
fn zero_profile_passes_at_roundoff() {
    let dir = tempfile::tempdir().unwrap();
    let smoke = std::fs::read_to_string(configs().join("smoke.cfg")).unwrap();
    let cfg = dir.path().join("zero.cfg");
    std::fs::write(
        &cfg,
        smoke
            .replace("kind = gaussian\na = 0.1", "kind = zero")
            .replace("dir = out/smoke", "dir = out"),
    )
    .unwrap();
    let o = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&dir.path().join("out"), "verify_report.json");
    for c in r["checks"].as_array().unwrap() {
        assert!(c["residual"].as_f64().unwrap() <= 1e-12, "{c}");
    }
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("smoke.cfg");
    let o = run(&["greens", "--config", cfg.to_str().unwrap(), "--tau", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("spectral parameter below unit threshold"));

    let bad = write_cfg(dir.path(), &"@SMOKE@".replace("@SMOKE@", "@SMOKE@\n"));
    let text = std::fs::read_to_string(&bad)
        .unwrap()
        .replace("taus = 2, 8", "taus = 0.5, 8");
    std::fs::write(&bad, text).unwrap();
    let o = run(&["greens", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(
        err.contains("spectral parameter below unit threshold") && err.contains("line 12"),
        "{err}"
    );

    let gap = write_cfg(dir.path(), "@SMOKE@");
    let text = std::fs::read_to_string(&gap)
        .unwrap()
        .replace("continuity = 1e-4\n", "");
    std::fs::write(&gap, text).unwrap();
    let o = run(&["verify", "--config", gap.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("'continuity'"));

    let o = run(&["verify", "--config", cfg.to_str().unwrap(), "--tau", "2,2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("conflicting overrides"));
    let o = run(&["verify", "--config", cfg.to_str().unwrap(), "--bogus"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn reruns_are_bit_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = configs().join("smoke.cfg");
    for d in [&a, &b] {
        let o = run(&[
            "greens",
            "--config",
            cfg.to_str().unwrap(),
            "--amplitude",
            "0.05",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    for name in ["greens_tau2.csv", "greens_tau8.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let (ra, rb) = (
        report(a.path(), "greens_report.json"),
        report(b.path(), "greens_report.json"),
    );
    assert_eq!(ra["checks"], rb["checks"]);
    assert_eq!(ra["config_hash"], rb["config_hash"]);
}
