use dcdiv::config::parse_config_str;
use dcdiv::report::{csv_string, emit_csv, parse_csv, RunManifest};
use dcdiv::sim::{run_sweep, SchemeSpec, SimConfig, Simulator};

#[test]
fn ssd_beats_nodiv_at_25_db() {
    let sim = Simulator::new(SimConfig::default()).unwrap();
    let ssd = sim.run_batch(SchemeSpec::ssd(2), 25.0, 0, 100_000).unwrap();
    let nodiv = sim
        .run_batch("nodiv_dc".parse().unwrap(), 25.0, 0, 100_000)
        .unwrap();
    assert_eq!(ssd.symbols, nodiv.symbols);
    assert!(
        ssd.errors < nodiv.errors,
        "ssd {} vs nodiv {}",
        ssd.errors,
        nodiv.errors
    );
}

fn quick_config() -> SimConfig {
    SimConfig {
        num_antennas: 32,
        target_errors: 50,
        max_trials: 5_000,
        ..SimConfig::default()
    }
}

#[test]
fn seven_point_grid_gives_sorted_points() {
    let cfg = SimConfig {
        schemes: vec!["nodiv_dc".parse().unwrap()],
        snr_db: vec![30.0, 0.0, 15.0, 5.0, 25.0, 10.0, 20.0],
        ..quick_config()
    };
    let r = run_sweep(&cfg).unwrap();
    assert_eq!(r.points.len(), 7);
    let snrs: Vec<f64> = r.points.iter().map(|p| p.snr_db).collect();
    assert_eq!(snrs, vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
    for p in &r.points {
        assert_eq!(p.ser, p.errors as f64 / p.symbols as f64);
        assert!((0.0..=1.0).contains(&p.ser));
    }
}

#[test]
fn ser_falls_from_0_to_30_db_for_every_scheme() {
    let cfg = SimConfig {
        snr_db: vec![0.0, 30.0],
        ..quick_config()
    };
    let r = run_sweep(&cfg).unwrap();
    for s in r.schemes() {
        let c = r.curve(s);
        assert!(c[0].ser > c[1].ser, "{s}: {} vs {}", c[0].ser, c[1].ser);
    }
}

#[test]
fn continuum_mode_runs_with_both_csi_modes() {
    for csi in ["estimated", "perfect"] {
        let cfg = parse_config_str(&format!(
            "mode = continuum\npaths = 32\nm = 16\ncsi = {csi}\nsnr_db_list = 10\nmax_trials = 64\n"
        ))
        .unwrap();
        let r = run_sweep(&cfg).unwrap();
        assert_eq!(r.points.len(), 3);
        assert!(r.points.iter().all(|p| p.trials > 0 && p.symbols > 0));
    }
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimConfig {
        snr_db: vec![0.0, 10.0],
        ..quick_config()
    };
    let r = run_sweep(&cfg).unwrap();
    let path = dir.path().join("out.csv");
    emit_csv(&r, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, csv_string(&r));
    let rows = parse_csv(&text).unwrap();
    assert_eq!(rows.len(), r.points.len());
    for (row, p) in rows.iter().zip(&r.points) {
        assert_eq!(
            (row.trials, row.symbols, row.errors),
            (p.trials, p.symbols, p.errors)
        );
        assert_eq!(row.snr_db, p.snr_db);
    }

    // rerunning from the manifest reproduces the CSV byte for byte
    let mpath = dir.path().join("out.csv.manifest");
    RunManifest::new(cfg).write(&mpath).unwrap();
    let again =
        run_sweep(&parse_config_str(&std::fs::read_to_string(&mpath).unwrap()).unwrap()).unwrap();
    assert_eq!(csv_string(&again), text);
}

#[test]
fn seed_changes_results() {
    let cfg = SimConfig {
        snr_db: vec![10.0],
        ..quick_config()
    };
    let a = csv_string(&run_sweep(&cfg).unwrap());
    let b = csv_string(&run_sweep(&SimConfig { seed: 2, ..cfg }).unwrap());
    assert_ne!(a, b);
}
