use quadnls::config::ExperimentConfig;
use quadnls::radial::{solve_radial_ground_state, DEFAULT_SHOOT_TOL};
use quadnls::verify::{run_suite, run_suites, SUITE_NAMES};
use quadnls::Error;

#[test]
fn every_suite_passes_on_the_stock_config() {
    let config = ExperimentConfig::default();
    let reports = run_suites(&[], &config).unwrap();
    assert_eq!(reports.len(), SUITE_NAMES.len());
    for (report, name) in reports.iter().zip(SUITE_NAMES) {
        assert_eq!(report.suite, *name);
        assert!(report.pass(), "{}", report.render());
    }
}

#[test]
fn suites_are_seed_deterministic() {
    let config = ExperimentConfig::default();
    let a = run_suite("cancellation", &config).unwrap();
    let b = run_suite("cancellation", &config).unwrap();
    for (ca, cb) in a.checks.iter().zip(&b.checks) {
        assert_eq!(ca.measured.to_bits(), cb.measured.to_bits(), "{}", ca.name);
    }

    let mut other = ExperimentConfig::default();
    other.seed ^= 0xdead;
    let c = run_suite("cancellation", &other).unwrap();
    assert_ne!(
        a.checks[1].measured.to_bits(),
        c.checks[1].measured.to_bits(),
        "different seeds must draw different fields"
    );
}

#[test]
fn gn_suite_names_the_missing_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let absent = dir.path().join("ground-state.meta");
    let mut config = ExperimentConfig::default();
    config.gs_artifact = Some(absent.clone());
    match run_suite("gn", &config) {
        Err(Error::MissingArtifact(path)) => assert_eq!(path, absent),
        other => panic!("expected a missing-artifact error, got {other:?}"),
    }
}

#[test]
fn gn_suite_reads_a_shooting_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let profile_path = dir.path().join("radial.csv");
    let meta_path = dir.path().join("ground-state.meta");

    let radial = solve_radial_ground_state(DEFAULT_SHOOT_TOL).unwrap();
    quadnls::io::write_radial_profile(&profile_path, &radial).unwrap();
    quadnls::io::write_metadata(
        &meta_path,
        &[
            ("artifact".to_string(), "ground-state".to_string()),
            ("method".to_string(), "shooting".to_string()),
            ("profile".to_string(), "radial.csv".to_string()),
        ],
    )
    .unwrap();

    let mut config = ExperimentConfig::default();
    config.gs_artifact = Some(meta_path);
    let report = run_suite("gn", &config).unwrap();
    assert!(report.pass(), "{}", report.render());
}
