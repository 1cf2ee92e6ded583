use blindcal::experiments::{
    extract_contours, run_coherence_experiment, run_imaging_demo, run_noise_experiment, run_stepsize_experiment,
    run_sweep, CoherenceConfig, ImagingConfig, NoiseConfig, StepsizeConfig, SweepSpec,
};
use blindcal::{Error, GainBasisKind, StepPolicy};

fn csv_bytes(spec: &SweepSpec, workers: usize) -> (Vec<u8>, Vec<u8>) {
    let res = run_sweep(spec, workers).unwrap();
    let mut cells = Vec::new();
    res.write_cells_csv(&mut cells).unwrap();
    let mut contours = Vec::new();
    res.write_contours_csv(&mut contours).unwrap();
    (cells, contours)
}

#[test]
fn sweeps_do_not_depend_on_worker_count() {
    let mut spec = SweepSpec::ambient(vec![16], vec![4, 8], vec![1, 2, 4, 8], vec![0.05], 6, 17);
    spec.noise_db = vec![40.0];
    let one = csv_bytes(&spec, 1);
    assert_eq!(one, csv_bytes(&spec, 3));
    assert_eq!(one, csv_bytes(&spec, 16));
    let text = String::from_utf8(one.0).unwrap();
    // header plus one row per cell
    assert_eq!(text.lines().count(), 1 + spec.cells().len());
    assert!(text.starts_with("n,m,p,rho,k,h,kind,sigma_db,trials,successes,mean_rmse_db,mean_iters\n"));
    let contours = String::from_utf8(one.1).unwrap();
    assert_eq!(contours.lines().count(), 1 + 6 * 2);
}

#[test]
fn success_counts_are_bounded_and_contours_consistent() {
    let spec = SweepSpec::ambient(vec![16], vec![8], vec![1, 2, 4, 8, 16], vec![0.01], 8, 1);
    let res = run_sweep(&spec, 2).unwrap();
    for c in &res.cells {
        assert!(c.successes <= c.trials);
    }
    // underdetermined cell fails, generous cell succeeds
    assert_eq!(res.cells[0].successes, 0);
    assert_eq!(res.cells[4].successes, 8);
    let again = extract_contours(&res.cells, &[0.5, 0.9]);
    let p50 = again[0].p_transition.unwrap();
    let p90 = again[1].p_transition.unwrap();
    assert!(p50 <= p90);
}

#[test]
fn sweep_specs_read_from_json() {
    let text = r#"{"n": [16], "m": [8], "p": [2, 4], "rho": [0.1], "k": [4], "h": [3], "gain_kinds": ["dct", "id_offset"],
                  "trials": 2, "policy": {"kind": "line_search"}}"#;
    let spec: SweepSpec = serde_json::from_str(text).unwrap();
    assert_eq!(spec.policy, StepPolicy::LineSearch);
    assert_eq!(spec.cells().len(), 4);
    assert_eq!(spec.cells()[2].kind, Some(GainBasisKind::IdOffset));
    let res = run_sweep(&spec, 1).unwrap();
    assert_eq!(res.cells.len(), 4);
    let bad = SweepSpec { trials: 0, ..spec };
    assert!(run_sweep(&bad, 1).is_err());
}

#[test]
fn noise_experiment_tracks_the_noise_level() {
    let cfg = NoiseConfig {
        n: 16,
        m: 16,
        p_list: vec![8],
        sigma_db_list: vec![20.0, 40.0, 60.0],
        trials: 4,
        max_iters: 4000,
        ..NoiseConfig::desk()
    };
    let res = run_noise_experiment(&cfg, 2).unwrap();
    assert_eq!(res.rows.len(), 3);
    let slope = res.slopes[0].1;
    assert!((0.7..1.3).contains(&slope), "{slope}");
    let dir = tempfile::tempdir().unwrap();
    res.save(dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("noise.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn coherence_outputs_per_kind_files() {
    let cfg = CoherenceConfig {
        n: 32,
        k: 4,
        h_list: vec![4],
        m_list: vec![8, 16],
        p_list: vec![1, 2],
        trials: 2,
        max_iters: 2000,
        ..CoherenceConfig::desk()
    };
    let res = run_coherence_experiment(&cfg, 2).unwrap();
    assert_eq!(res.summaries.len(), 2 * 3);
    let ido = res.summary(GainBasisKind::IdOffset, 16, 4).unwrap();
    assert!((ido.mu_max - 2.0).abs() < 1e-9);
    let dir = tempfile::tempdir().unwrap();
    res.save(dir.path()).unwrap();
    for name in ["cells.csv", "contours.csv", "coherence.csv", "contours_dct.csv", "contours_id_offset.csv", "contours_random_rotated.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let bad = CoherenceConfig { h_list: vec![32], ..cfg };
    assert!(run_coherence_experiment(&bad, 1).is_err());
}

#[test]
fn stepsize_experiment_writes_both_trajectories() {
    let cfg = StepsizeConfig { n: 16, m: 8, p: 6, rho: 0.3, mu_signal: 0.05, max_iters: 20_000, ..StepsizeConfig::desk() };
    let res = run_stepsize_experiment(&cfg).unwrap();
    assert!(res.line_search.converged());
    assert!(res.regime().is_some());
    assert_eq!(res.sandwich_violations(cfg.rho, 1e-10), 0);
    let dir = tempfile::tempdir().unwrap();
    res.save(dir.path()).unwrap();
    let traj = std::fs::read_to_string(dir.path().join("trajectory_linesearch.csv")).unwrap();
    assert!(traj.starts_with("iter,f,delta,delta_F,mu_signal,mu_gain\n"));
    assert_eq!(traj.lines().count(), res.line_search.iterations + 2);
    assert!(dir.path().join("trajectory_fixed.csv").exists());
}

#[test]
fn imaging_demo_small_and_guarded() {
    let cfg = ImagingConfig { side_n: 8, side_m: 4, p: 6, rho: 0.5, ..ImagingConfig::desk() };
    let res = run_imaging_demo(&cfg).unwrap();
    assert!(res.gap_db() > 20.0);
    let dir = tempfile::tempdir().unwrap();
    res.save(dir.path()).unwrap();
    let pgm = std::fs::read(dir.path().join("x_hat.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n8 8\n255\n"));
    assert_eq!(pgm.len(), b"P5\n8 8\n255\n".len() + 64);

    let flat = ImagingConfig { rho: 0.0, ..cfg.clone() };
    let res = run_imaging_demo(&flat).unwrap();
    assert!(res.least_squares.rmse_db < -100.0);
    assert!(res.blind.rmse_db < -60.0);

    assert!(matches!(run_imaging_demo(&ImagingConfig { side_n: 256, ..cfg.clone() }), Err(Error::TooLarge(_))));
    assert!(run_imaging_demo(&ImagingConfig { side_n: 12, ..cfg }).is_err());
}
