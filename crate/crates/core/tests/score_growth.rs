use gpmle::experiments::{fit_rate, run_cubature_curve, Column, ExperimentConfig};

#[test]
fn fixed_scale_score_grows_faster_than_adaptive_score() {
    let cfg = ExperimentConfig::cubature_ibm(0.25).unwrap();
    let records = run_cubature_curve(&cfg).unwrap();
    let adaptive = fit_rate(&records, Column::Score, cfg.fit_window).unwrap();
    let fixed = fit_rate(&records, Column::FixedSigmaScore, cfg.fit_window).unwrap();
    assert!(
        fixed.slope > adaptive.slope,
        "fixed {} vs adaptive {}",
        fixed.slope,
        adaptive.slope
    );
    assert!(adaptive.slope > 0.0);
}

#[test]
fn score_stays_flat_for_functions_in_the_native_space() {
    let cfg = ExperimentConfig::cubature_ibm(1.25).unwrap();
    let records = run_cubature_curve(&cfg).unwrap();
    let fit = fit_rate(&records, Column::Score, cfg.fit_window).unwrap();
    assert!(fit.slope <= 0.6, "slope {}", fit.slope);
}

#[test]
fn integration_error_decays() {
    let cfg = ExperimentConfig::cubature_ibm(1.25).unwrap();
    let records = run_cubature_curve(&cfg).unwrap();
    let fit = fit_rate(&records, Column::AbsIntError, cfg.fit_window).unwrap();
    assert!(fit.slope < -1.0, "slope {}", fit.slope);
}
