use holowave::diagnostics::{
    conservation_from_series, log_log_slope, paired_from_reports, read_series, series_header, write_series,
    Expectations,
};
use holowave::evolution::{run, Profile, RunConfig, Trajectory};
use holowave::grid::GridSpec;

fn short_run() -> Trajectory {
    let cfg = RunConfig {
        grid: GridSpec::new(64, 4.0, 1.0 / 3.0).unwrap(),
        epsilon: 1e-3,
        profile: Profile::SechPacket { width: 1.5 },
        carrier_wavenumber: 4,
        t_end: 0.5,
        output_interval: 0.1,
        ..RunConfig::default_run()
    };
    run(&cfg).unwrap()
}

#[test]
fn series_round_trip_is_exact() {
    let traj = short_run();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("series.csv");
    write_series(&traj, &p).unwrap();
    let back = read_series(&p).unwrap();
    assert_eq!(back.config, traj.config);
    assert_eq!(back.config_hash, traj.config_hash);
    assert_eq!(back.rows.len(), traj.checkpoints.len());
    for (row, c) in back.rows.iter().zip(&traj.checkpoints) {
        assert_eq!(row[0].to_bits(), c.energy.t.to_bits());
        assert_eq!(row[1].to_bits(), c.energy.e_total.to_bits());
    }
    assert_eq!(back.energies(), traj.energies());
}

#[test]
fn snapshot_energies_are_real_and_positive() {
    let traj = short_run();
    for c in &traj.checkpoints {
        assert!(c.energy.e_total > 0.0);
        assert!(c.energy.realness_defect() < 1e-8, "{}", c.energy.realness_defect());
    }
}

#[test]
fn empty_trajectory_writes_header_only() {
    let mut traj = short_run();
    traj.checkpoints.clear();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("series.csv");
    write_series(&traj, &p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text, series_header(traj.config.s_track).join(",") + "\n");
    assert!(read_series(&p).unwrap().rows.is_empty());
}

#[test]
fn constant_energy_has_no_drift() {
    let series: Vec<(f64, f64)> = (0..10).map(|j| (j as f64, 0.0)).collect();
    let rep = conservation_from_series(0.0, &series).unwrap();
    assert_eq!(rep.max_drift, 0.0);
    assert_eq!(rep.relative_drift, 0.0);
    assert!(conservation_from_series(1e-2, &series[..1]).is_err());
}

#[test]
fn quadratic_drift_gives_ratio_four() {
    let drift = |eps: f64| {
        let s: Vec<(f64, f64)> = (0..5).map(|j| (j as f64, 1.0 + 3.0 * eps * eps * j as f64)).collect();
        conservation_from_series(eps, &s).unwrap()
    };
    let p = paired_from_reports(drift(1e-2), drift(5e-3)).unwrap();
    assert!((p.ratio - 4.0).abs() < 1e-9);
    assert!((p.exponent - 2.0).abs() < 1e-9);
    assert!(paired_from_reports(drift(5e-3), drift(1e-2)).is_err());
}

#[test]
fn slope_fitter_on_exact_powers() {
    for k in [1.0, 2.0, 4.0] {
        let pts: Vec<(f64, f64)> = [1e-2, 5e-3, 2.5e-3].iter().map(|&e: &f64| (e, 0.3 * e.powf(k))).collect();
        assert!((log_log_slope(&pts).unwrap() - k).abs() < 1e-12);
    }
}

#[test]
fn recalibration_bumps_the_version() {
    let base = Expectations::builtin();
    let next = base.recalibrated(1e-4);
    assert_eq!(next.version, base.version + 1);
    assert_eq!(next.relative_drift_pin, 2e-4);
    assert_eq!(next.slope_tolerance, base.slope_tolerance);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("expectations.json");
    next.save(&p).unwrap();
    assert_eq!(Expectations::load(&p).unwrap(), next);
}
