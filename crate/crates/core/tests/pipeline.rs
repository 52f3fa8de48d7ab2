//! End-to-end pipeline tests on the rotating-target benchmark.

use nalgebra::DMatrix;
use zonest::kalman::identify_point_model;
use zonest::learn::learn_model_set;
use zonest::scenario::{generate_data, run_scenario, ScenarioConfig, Variant, ZonotopeSpec};

#[test]
fn single_run_contains_truth_in_every_variant() {
    let mut cfg = ScenarioConfig::rotating_target(2024);
    cfg.train_len = 500;
    cfg.steps = 20;
    let report = run_scenario(&cfg, &Variant::ALL).unwrap();
    assert_eq!(report.variants.len(), 4);
    for variant in &report.variants {
        assert_eq!(variant.steps.len(), 20, "{}", variant.variant);
        for step in &variant.steps {
            assert!(
                step.contained,
                "variant {} lost the true state at step {}",
                variant.variant, step.k
            );
            assert!(step.radius.is_finite());
            assert!(step.step_ms >= 0.0);
        }
    }
    assert!(report.containment_ok());
    assert_eq!(report.baseline.len(), 20);
    for warning in &report.model_warnings {
        eprintln!("warning: {warning}");
    }
}

#[test]
fn point_model_identification_is_consistent() {
    let truth = DMatrix::from_row_slice(2, 3, &[0.9455, -0.2426, 0.1, 0.2486, 0.9455, 0.0]);

    // zero-noise limit: exact recovery
    let mut cfg = ScenarioConfig::rotating_target(5);
    cfg.train_len = 60;
    cfg.noise_gamma = ZonotopeSpec::point(vec![0.0, 0.0]);
    cfg.noise_w = ZonotopeSpec::point(vec![0.0, 0.0]);
    let (td, _) = generate_data(&cfg).unwrap();
    let model = learn_model_set(&td, &cfg.noise_w.to_zonotope().unwrap(), cfg.m_bound).unwrap();
    let (a_hat, b_hat) = identify_point_model(&model).unwrap();
    assert!((&a_hat - truth.view((0, 0), (2, 2))).amax() < 1e-8);
    assert!((&b_hat - truth.view((0, 2), (2, 1))).amax() < 1e-8);

    // noisy benchmark: the point model stays inside the learned set, and its
    // deviation from the truth is bounded by the interval width
    let cfg = ScenarioConfig::rotating_target(6);
    let (td, _) = generate_data(&cfg).unwrap();
    let model = learn_model_set(&td, &cfg.noise_w.to_zonotope().unwrap(), cfg.m_bound).unwrap();
    let (a_hat, b_hat) = identify_point_model(&model).unwrap();
    let mut ab_hat = DMatrix::zeros(2, 3);
    ab_hat.view_mut((0, 0), (2, 2)).copy_from(&a_hat);
    ab_hat.view_mut((0, 2), (2, 1)).copy_from(&b_hat);
    assert!(model.m_sigma_interval.contains(&ab_hat, 1e-9));
    assert!(model.m_sigma_interval.contains(&truth, 1e-9));
    let a_err = (&a_hat - truth.view((0, 0), (2, 2))).norm();
    let radius_bound = model
        .m_sigma_interval
        .radius()
        .view((0, 0), (2, 2))
        .norm()
        * 2.0;
    assert!(
        a_err <= radius_bound,
        "point model deviates more than the set width allows: {a_err} > {radius_bound}"
    );
}

#[test]
fn truth_stays_within_declared_bounds() {
    let cfg = {
        let mut c = ScenarioConfig::rotating_target(3);
        c.train_len = 50;
        c.steps = 10;
        c
    };
    let (_, truth) = generate_data(&cfg).unwrap();
    let max_norm = truth.states.iter().map(|x| x.norm()).fold(0.0, f64::max);
    assert!(
        max_norm < cfg.m_bound,
        "simulated trajectory exceeds the declared norm bound: {max_norm}"
    );
}
