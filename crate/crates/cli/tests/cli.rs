use std::path::Path;
use std::process::{Command, Output};

fn simulate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(args)
        .output()
        .expect("failed to start simulate")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const SMALL: &str = "m = 16\nq = 4\nsnr_db_list = 0, 10\ntarget_errors = 40\nmax_trials = 500\n";

#[test]
fn writes_csv_manifest_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    let out = dir.path().join("res.csv");
    write(&conf, SMALL);
    let o = simulate(&[
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("scheme,snr_db,trials,symbols,errors,ser,ser_stderr")
    );
    assert_eq!(lines.count(), 6);

    let manifest = std::fs::read_to_string(dir.path().join("res.csv.manifest")).unwrap();
    assert!(manifest.contains("seed = 1"));
    assert!(manifest.contains("m = 16"));

    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("diversity order") || stdout.contains("fit unavailable"));
    assert!(stdout.contains("ordering (SER ascending)"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    write(&conf, SMALL);
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let o = simulate(&[
            "--config",
            conf.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "9",
        ]);
        assert!(o.status.success());
        outputs.push((
            std::fs::read(&out).unwrap(),
            std::fs::read(dir.path().join(format!("{name}.manifest"))).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    let out = dir.path().join("res.csv");
    write(&conf, SMALL);
    let o = simulate(&[
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--scheme",
        "ssd_dc_k3",
        "--snr",
        "-5,5",
        "--seed",
        "42",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("ssd_dc_k3,-5,"));
    assert!(rows[1].starts_with("ssd_dc_k3,5,"));
    let manifest = std::fs::read_to_string(dir.path().join("res.csv.manifest")).unwrap();
    assert!(manifest.contains("seed = 42"));
}

#[test]
fn invalid_config_exits_nonzero_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    for (text, key) in [("k = 9\n", "`k`"), ("antennas = 64\n", "`antennas`")] {
        write(&conf, text);
        let o = simulate(&[
            "--config",
            conf.to_str().unwrap(),
            "--out",
            dir.path().join("x.csv").to_str().unwrap(),
        ]);
        assert!(!o.status.success());
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(key), "{err}");
    }
}

#[test]
fn missing_config_file_fails() {
    let o = simulate(&["--config", "/nonexistent/run.conf"]);
    assert!(!o.status.success());
    assert!(!o.stderr.is_empty());
}
