mod common;

use selftest_core::experiments::log_log_slope;
use selftest_core::extract::{build_kit, extract, orthogonalize, swap_isometry, yn_residuals, ExtractionKit};
use selftest_core::linalg::{c64, CMatrix, PureState, C64, DEFAULT_MAX_DIM};
use selftest_core::strategy::{perturb, Family};

use common::*;

/// `(A ⊗ B)ψ` on the coefficient matrix.
fn act(a: &CMatrix, m: &CMatrix, b: &CMatrix) -> CMatrix {
    &(a * m) * &b.transpose()
}

#[test]
fn kit_identities_hold_exactly_on_ideal_strategies() {
    for (family, s, strat) in ideal_suite(31) {
        let kit = build_kit(&strat, family, &s).unwrap();
        let m = strat.state().coefficient_matrix(1).unwrap();
        let (ia, ib) = (CMatrix::identity(m.rows()), CMatrix::identity(m.cols()));
        assert!(kit.defect() <= 1e-10, "{family} d={}: defect {}", s.d(), kit.defect());
        let junk = act(&kit.p_a[0], &m, &ib);
        for k in 0..s.d() {
            let left = act(&kit.p_a[k], &m, &ib);
            let right = act(&ia, &m, &kit.p_b[k]);
            assert!((&left - &right).norm_fro() <= 1e-10);
            assert!((left.norm_fro() - s.c()[k]).abs() <= 1e-10);
            let moved = act(&kit.chain_x_a[k], &left, &kit.chain_x_b[k]);
            assert!((&moved - &junk.scale_real(s.c()[k] / s.c()[0])).norm_fro() <= 1e-10);
        }
        let total = kit
            .p_a
            .iter()
            .fold(CMatrix::zeros(m.rows(), m.rows()), |acc, p| &acc + p);
        assert!((&act(&total, &m, &ib) - &m).norm_fro() <= 1e-10);
    }
}

#[test]
fn clock_operators_have_the_right_phases() {
    for (family, s, strat) in ideal_suite(32).into_iter().step_by(5) {
        let kit = build_kit(&strat, family, &s).unwrap();
        let m = strat.state().coefficient_matrix(1).unwrap();
        let ib = CMatrix::identity(m.cols());
        for k in 0..s.d() {
            let pk = act(&kit.p_a[k], &m, &ib);
            let zk = act(&kit.z_a, &pk, &ib);
            let phase = kit.omega.powu(k as u32);
            assert!(
                (&zk - &pk.scale(phase)).norm_fro() <= 1e-10,
                "{family} d={} k={k}",
                s.d()
            );
        }
    }
}

#[test]
fn swap_output_carries_the_target_state_on_the_ancillas() {
    for (family, s, strat) in ideal_suite(33).into_iter().step_by(3) {
        let kit = build_kit(&strat, family, &s).unwrap();
        let out = swap_isometry(&kit, strat.state(), s.c(), DEFAULT_MAX_DIM).unwrap();
        assert!(out.error <= 1e-8);
        assert!((out.junk.norm_fro() - 1.0).abs() <= 1e-10);
        let d = s.d();
        let [na, _, nb, _] = out.output.dims().try_into().unwrap();
        let amps = out.output.amplitudes();
        let mut weight = vec![vec![0.0; d]; d];
        for idx in 0..amps.len() {
            let l = idx % d;
            let k = (idx / (d * nb)) % d;
            weight[k][l] += amps[idx].norm_sqr();
        }
        for (k, row) in weight.iter().enumerate() {
            for (l, w) in row.iter().enumerate() {
                let expected = if k == l { s.c()[k].powi(2) } else { 0.0 };
                assert!((w - expected).abs() <= 1e-10);
            }
        }
        assert_eq!(out.output.dim(), na * d * nb * d);
    }
}

#[test]
fn kits_stay_exact_under_noise() {
    for (i, (family, s, strat)) in ideal_suite(34).into_iter().enumerate().step_by(2) {
        let noisy = perturb(&strat, 1e-3, i as u64);
        let kit = build_kit(&noisy, family, &s).unwrap();
        assert!(kit.defect() <= 1e-9, "{family} d={}: defect {}", s.d(), kit.defect());
        assert!(kit.p_a.iter().chain(&kit.p_b).all(|p| p.is_projector(1e-9)));
        assert!(kit.z_a.is_unitary(1e-9) && kit.z_b.is_unitary(1e-9));
    }
}

#[test]
fn residuals_grow_with_the_perturbation() {
    let eps = [1e-5, 1e-4, 1e-3, 1e-2];
    for (family, d) in [
        (Family::ManyAnswers, 3),
        (Family::ManyAnswers, 5),
        (Family::ManyQuestions, 4),
    ] {
        let s = random_coefficients(&mut rng(d as u64), d);
        let strat = ideal(family, &s);
        let mut res = Vec::new();
        let mut err = Vec::new();
        for &e in &eps {
            let x = extract(&perturb(&strat, e, 5), family, &s).unwrap();
            res.push(x.residuals.overall);
            err.push(x.error);
        }
        let slope = log_log_slope(&eps, &res).unwrap();
        assert!(slope >= 0.4, "{family} d={d}: residual slope {slope}");
        assert!(res.windows(2).all(|w| w[1] > w[0]));
        assert!(err.windows(2).all(|w| w[1] > w[0]));
        assert!(err[0] <= 1e-2);
    }
}

fn random_hermitian(seed: u64, n: usize) -> CMatrix {
    let mut r = rng(seed);
    CMatrix::from_fn(n, n, |_, _| c64(gaussian(&mut r), gaussian(&mut r))).hermitian_part()
}

#[test]
fn orthogonalization_moves_projections_by_root_eps() {
    let s = random_coefficients(&mut rng(40), 5);
    let strat = ideal(Family::ManyAnswers, &s);
    let kit = build_kit(&strat, Family::ManyAnswers, &s).unwrap();
    let psi: &PureState = strat.state();
    let n = kit.p_a[0].rows();
    let mut moves = Vec::new();
    let eps = [1e-6, 1e-4, 1e-2];
    for &e in &eps {
        let tilted: Vec<CMatrix> = kit
            .p_a
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let u = random_hermitian(k as u64, n).hermitian_map(|x| C64::from_polar(1.0, e * x));
                &(&u * p) * &u.adjoint()
            })
            .collect();
        let q = orthogonalize(&tilted, psi).unwrap();
        for (a, qa) in q.iter().enumerate() {
            assert!(qa.is_projector(1e-10));
            for qb in &q[..a] {
                assert!((qa * qb).norm_fro() <= 1e-10);
            }
        }
        let moved = q
            .iter()
            .zip(&tilted)
            .map(|(a, b)| (a - b).norm_fro())
            .fold(0.0, f64::max);
        assert!(moved <= 10.0 * e.sqrt(), "eps {e}: moved {moved}");
        moves.push(moved);
    }
    assert!(moves.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn orthogonalizing_orthogonal_projections_changes_nothing() {
    let s = random_coefficients(&mut rng(41), 4);
    let strat = ideal(Family::ManyQuestions, &s);
    let kit = build_kit(&strat, Family::ManyQuestions, &s).unwrap();
    let q = orthogonalize(&kit.p_a, strat.state()).unwrap();
    for (a, b) in q.iter().zip(&kit.p_a) {
        assert!((a - b).norm_fro() <= 1e-10);
    }
}

#[test]
fn kit_survives_a_json_round_trip() {
    let s = random_coefficients(&mut rng(42), 5);
    let strat = ideal(Family::ManyAnswers, &s);
    let kit = build_kit(&strat, Family::ManyAnswers, &s).unwrap();
    let text = serde_json::to_string(&kit).unwrap();
    let back: ExtractionKit = serde_json::from_str(&text).unwrap();
    assert_eq!(back, kit);
    let a = yn_residuals(&kit, strat.state(), s.c()).unwrap();
    let b = yn_residuals(&back, strat.state(), s.c()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn swap_respects_the_dimension_cap() {
    let s = random_coefficients(&mut rng(43), 3);
    let strat = ideal(Family::ManyAnswers, &s);
    let kit = build_kit(&strat, Family::ManyAnswers, &s).unwrap();
    let e = swap_isometry(&kit, strat.state(), s.c(), 80).unwrap_err();
    assert!(e.is_resource());
    assert!(swap_isometry(&kit, strat.state(), s.c(), 81).is_ok());
}

#[test]
fn embedded_strategies_extract_exactly() {
    let mut r = rng(44);
    for (family, d) in [(Family::ManyAnswers, 3), (Family::ManyQuestions, 4)] {
        let s = random_coefficients(&mut r, d);
        let big = embed(&ideal(family, &s), 2, &mut r);
        let x = extract(&big, family, &s).unwrap();
        assert!(x.residuals.overall <= 1e-8, "{family}: {:?}", x.residuals);
        assert!(x.error <= 1e-8, "{family}: {}", x.error);
    }
}
