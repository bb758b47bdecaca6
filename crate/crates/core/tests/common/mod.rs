#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use selftest_core::linalg::{c64, CMatrix, CVector, PureState};
use selftest_core::states::{make_state, SchmidtState};
use selftest_core::strategy::{many_answers_ideal, many_questions_ideal, Family, Measurement, Strategy};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn random_coefficients(rng: &mut impl Rng, d: usize) -> SchmidtState {
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..1.0)).collect();
    make_state(&raw).unwrap()
}

pub fn ideal(family: Family, s: &SchmidtState) -> Strategy {
    match family {
        Family::ManyAnswers => many_answers_ideal(s).unwrap(),
        Family::ManyQuestions => many_questions_ideal(s).unwrap(),
    }
}

/// Five random coefficient vectors per dimension, both families.
pub fn ideal_suite(seed: u64) -> Vec<(Family, SchmidtState, Strategy)> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for (family, dims) in [(Family::ManyAnswers, [3, 5, 7]), (Family::ManyQuestions, [4, 6, 8])] {
        for d in dims {
            for _ in 0..5 {
                let s = random_coefficients(&mut r, d);
                let strat = ideal(family, &s);
                out.push((family, s, strat));
            }
        }
    }
    out
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| c64(gaussian(rng), gaussian(rng)));
    let (u, _, v) = g.svd();
    &u * &v.adjoint()
}

/// Random correlation table set: `count` tables of `len` entries each.
pub fn random_tables(rng: &mut impl Rng, count: usize, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count * len);
    for _ in 0..count {
        let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>().powi(3)).collect();
        let total: f64 = raw.iter().sum();
        out.extend(raw.iter().map(|x| x / total));
    }
    out
}

/// Embeds a strategy into local dimensions enlarged by `extra`, rotated by
/// random local unitaries. The added directions go to the first outcome.
pub fn embed(strategy: &Strategy, extra: usize, rng: &mut impl Rng) -> Strategy {
    let (da, db) = (strategy.dim_a(), strategy.dim_b());
    let (na, nb) = (da + extra, db + extra);
    let ua = random_unitary(rng, na);
    let ub = random_unitary(rng, nb);
    let lift = |m: &Measurement, n: usize, u: &CMatrix| {
        let old = m.dim();
        let projectors = m
            .projectors()
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let mut big = p.embed(n);
                if k == 0 {
                    for i in old..n {
                        big.set(i, i, c64(1.0, 0.0));
                    }
                }
                &(u * &big) * &u.adjoint()
            })
            .collect();
        Measurement::new(m.question(), m.outcomes().to_vec(), projectors).unwrap()
    };
    let alice = strategy.alice().iter().map(|m| lift(m, na, &ua)).collect();
    let bob = strategy.bob().iter().map(|m| lift(m, nb, &ub)).collect();
    let small = strategy.state().coefficient_matrix(1).unwrap();
    let coeff = CMatrix::from_fn(na, nb, |i, j| {
        if i < da && j < db {
            small.get(i, j)
        } else {
            c64(0.0, 0.0)
        }
    });
    let rotated = &(&ua * &coeff) * &ub.transpose();
    let state = PureState::normalized(
        vec![na, nb],
        CVector::from_fn(na * nb, |k, _| rotated.get(k / nb, k % nb)),
    )
    .unwrap();
    Strategy::new(state, alice, bob).unwrap()
}
