mod common;

use selftest_core::correlation::{distance, evaluate, Correlation};
use selftest_core::experiments::{
    run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport, ExperimentResult,
};
use selftest_core::states::SchmidtState;
use selftest_core::strategy::{perturb, tilted_chsh_ideal, Family, Strategy};
use selftest_core::verify::{verify_many_answers, verify_many_questions, VerifyReport};

use common::*;

fn verify(family: Family, p: &Correlation, s: &SchmidtState, tol: f64) -> VerifyReport {
    match family {
        Family::ManyAnswers => verify_many_answers(p, s, tol),
        Family::ManyQuestions => verify_many_questions(p, s, tol),
    }
    .unwrap()
}

#[test]
fn noise_is_detected_and_located() {
    for (i, (family, s, strat)) in ideal_suite(50).into_iter().enumerate().step_by(4) {
        let p = evaluate(&perturb(&strat, 1e-4, i as u64)).unwrap();
        let r = verify(family, &p, &s, 1e-10);
        assert!(!r.passed, "{family} d={}", s.d());
        let first = r.first_violation.unwrap();
        assert!(first.residual > 1e-10);
        assert!(r.worst.unwrap().residual >= first.residual);
        assert!(r.max_residual <= 1e-2);
        assert!(verify(family, &p, &s, 1e-2).passed);
    }
}

#[test]
fn verification_is_specific_to_the_state() {
    let mut r = rng(51);
    for (family, d) in [(Family::ManyAnswers, 5), (Family::ManyQuestions, 6)] {
        let s = random_coefficients(&mut r, d);
        let other = random_coefficients(&mut r, d);
        let p = evaluate(&ideal(family, &s)).unwrap();
        assert!(verify(family, &p, &s, 1e-10).passed);
        assert!(!verify(family, &p, &other, 1e-6).passed);
    }
}

#[test]
fn wrong_parity_is_rejected() {
    let s = random_coefficients(&mut rng(52), 3);
    let p = evaluate(&ideal(Family::ManyAnswers, &s)).unwrap();
    assert!(verify_many_questions(&p, &s, 1e-10).is_err());
}

#[test]
fn strategy_and_correlation_round_trip() {
    for (_, _, strat) in ideal_suite(53).into_iter().step_by(5) {
        let back = Strategy::from_json(&strat.to_json().unwrap()).unwrap();
        let p = evaluate(&strat).unwrap();
        assert_eq!(distance(&p, &evaluate(&back).unwrap()).unwrap().value, 0.0);

        let json = Correlation::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(json, p);
        let csv = Correlation::read_csv(p.to_csv().unwrap().as_bytes()).unwrap();
        assert_eq!(csv, p);
    }
    let chsh = tilted_chsh_ideal(0.7).unwrap();
    assert_eq!(
        Strategy::from_json(&chsh.to_json().unwrap())
            .unwrap()
            .to_json()
            .unwrap(),
        chsh.to_json().unwrap()
    );
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(Strategy::from_json("{}").is_err());
    assert!(Correlation::from_json("[1, 2]").is_err());
    assert!(Correlation::read_csv("x,y\n1,2\n".as_bytes()).is_err());
    assert!(serde_json::from_str::<SchmidtState>(r#"{"c": [0.5, 0.5]}"#).is_err());
    assert!(serde_json::from_str::<SchmidtState>(r#"{"c": [1.0, -0.0]}"#).is_err());
}

fn config(kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig {
        experiment: kind,
        family: None,
        n_list: vec![],
        d_list: vec![],
        eps_grid: vec![],
        trials: 1,
        seed: 0,
        cutoff: None,
        slope_window: None,
        min_slope: None,
        max_dim: None,
        output: None,
    }
}

#[test]
fn reports_round_trip_through_json() {
    let mut w = config(ExperimentKind::Witness);
    w.n_list = vec![3, 5];
    let mut rb = config(ExperimentKind::Robustness);
    rb.d_list = vec![3];
    rb.eps_grid = vec![0.0, 1e-3];
    let mut cv = config(ExperimentKind::Convergence);
    cv.family = Some(Family::ManyQuestions);
    cv.n_list = vec![4, 6];
    for cfg in [w, rb, cv] {
        let report = run_experiment(&cfg).unwrap();
        let text = report.to_json().unwrap();
        let back: ExperimentReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.config_hash, cfg.hash());
        assert_eq!(back.version, env!("CARGO_PKG_VERSION"));
        let csv = report.to_csv().unwrap();
        let rows = match &report.result {
            ExperimentResult::Convergence(r) => r.rows.len(),
            ExperimentResult::Robustness(r) => r.records.len(),
            ExperimentResult::Witness(r) => r.rows.len(),
        };
        assert_eq!(csv.lines().count(), rows + 1);
    }
}

#[test]
fn config_hash_tracks_content() {
    let mut a = config(ExperimentKind::Witness);
    a.n_list = vec![3, 5];
    let mut b = a.clone();
    assert_eq!(a.hash(), b.hash());
    b.seed = 1;
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    a.n_list.push(4);
    assert!(a.validate().is_err());
}

#[test]
fn extra_trials_leave_existing_rows_unchanged() {
    let mut cfg = config(ExperimentKind::Robustness);
    cfg.d_list = vec![3, 4];
    cfg.eps_grid = vec![1e-4, 1e-3];
    cfg.seed = 9;
    cfg.trials = 1;
    let one = run_experiment(&cfg).unwrap();
    cfg.trials = 2;
    let two = run_experiment(&cfg).unwrap();
    let (ExperimentResult::Robustness(one), ExperimentResult::Robustness(two)) = (one.result, two.result) else {
        panic!("robustness expected")
    };
    for row in &one.records {
        assert!(two.records.contains(row));
    }
    assert_eq!(two.records.len(), 2 * one.records.len());
}

#[test]
fn exact_rows_extract_exactly() {
    let mut cfg = config(ExperimentKind::Robustness);
    cfg.d_list = vec![3, 4];
    cfg.eps_grid = vec![0.0];
    let report = run_experiment(&cfg).unwrap();
    let ExperimentResult::Robustness(r) = report.result else {
        panic!()
    };
    assert!(r
        .records
        .iter()
        .all(|x| x.extraction_error <= 1e-8 && x.delta_corr <= 1e-12));
}
