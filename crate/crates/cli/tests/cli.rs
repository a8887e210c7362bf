use std::path::Path;
use std::process::Command;

fn sipair(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sipair"))
        .args(args)
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn straight_preset_spectrum_peak() {
    let dir = tempfile::tempdir().unwrap();
    let out = sipair(&[
        "simulate-waveguide",
        "--preset",
        "paper-straight-setup1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let peak = read(dir.path(), "spectrum.csv")
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .fold(0.0f64, f64::max);
    assert!((peak - 3.14e-5).abs() < 0.02e-5, "{peak}");
}

#[test]
fn ring_preset_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = sipair(&[
        "simulate-ring",
        "--preset",
        "paper-ring-setup2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let sweep = read(dir.path(), "ring_sweep.csv");
    let row = sweep.lines().find(|l| l.starts_with("0.4,")).unwrap();
    let mhz: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert!((mhz - 11.6).abs() < 0.1, "{mhz}");
}

#[test]
fn coincidence_is_deterministic_and_manifest_reproduces() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let common = [
        "simulate-coincidence",
        "--preset",
        "paper-straight-setup1",
        "--seed",
        "42",
        "--override",
        "coincidence.n_gates=100000",
    ];
    for d in [&a, &b] {
        let mut args = common.to_vec();
        args.extend(["--out", d.path().to_str().unwrap()]);
        assert!(sipair(&args).status.success());
    }
    assert_eq!(
        read(a.path(), "histogram.csv"),
        read(b.path(), "histogram.csv")
    );
    let manifest = a.path().join("manifest.toml");
    let out = sipair(&[
        "simulate-coincidence",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        c.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "histogram.csv",
        "coincidence_summary.csv",
        "snr_curve.csv",
        "manifest.toml",
    ] {
        assert_eq!(read(a.path(), f), read(c.path(), f), "{f}");
    }
}

#[test]
fn validation_errors_exit_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = sipair(&[
        "simulate-waveguide",
        "--preset",
        "paper-straight-setup1",
        "--override",
        "pump.sweep_mw=[]",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep must be non-empty"));
    assert!(!out_dir.exists());

    let out = sipair(&[
        "simulate-coincidence",
        "--preset",
        "paper-straight-setup1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("coincidence.seed"));

    let out = sipair(&[
        "simulate-ring",
        "--preset",
        "no-such-preset",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn list_presets_shows_notes() {
    let out = sipair(&["list-presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "paper-straight-setup1",
        "paper-sagnac-setup1",
        "paper-ring-setup2",
        "paper-straight-setup2",
    ] {
        assert!(text.contains(name));
    }
    assert!(text.contains("50 ns gates"));
}
