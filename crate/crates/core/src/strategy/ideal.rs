//! Ideal strategies of the tilted-CHSH block and the two block families.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use super::{Answer, Family, Measurement, QuestionLabel, Strategy, Tag};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, PureState};
use crate::states::{block_params, psi_n, BlockParams, SchmidtState};

/// Real amplitudes of a qubit vector `v0|lo⟩ + v1|hi⟩`.
type Qubit = [f64; 2];

const Z_PLUS: Qubit = [1.0, 0.0];
const Z_MINUS: Qubit = [0.0, 1.0];
const X_PLUS: Qubit = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
const X_MINUS: Qubit = [FRAC_1_SQRT_2, -FRAC_1_SQRT_2];

/// ±1 eigenvectors of `cos μ σ_z + sign · sin μ σ_x`.
fn bob_pair(mu: f64, sign: f64) -> (Qubit, Qubit) {
    let (s, c) = (mu / 2.0).sin_cos();
    ([c, sign * s], [-sign * s, c])
}

/// `|v⟩⟨v|` with `v` supported on `(lo, hi)` inside dimension `n`.
fn rank_one(n: usize, lo: usize, hi: usize, v: Qubit) -> CMatrix {
    CMatrix::from_real_fn(n, n, |i, j| {
        let a = if i == lo {
            v[0]
        } else if i == hi {
            v[1]
        } else {
            return 0.0;
        };
        let b = if j == lo {
            v[0]
        } else if j == hi {
            v[1]
        } else {
            return 0.0;
        };
        a * b
    })
}

fn basis_projector(n: usize, k: usize) -> CMatrix {
    CMatrix::from_real_fn(n, n, |i, j| if i == k && j == k { 1.0 } else { 0.0 })
}

/// `I − Σ P`, computed entrywise.
fn complement(n: usize, ps: &[CMatrix]) -> CMatrix {
    let total = CMatrix::sum(n, ps);
    &CMatrix::identity(n) - &total
}

/// Binary measurement `{|plus⟩⟨plus|, |minus⟩⟨minus|}` on a qubit.
fn qubit_measurement(q: QuestionLabel, plus: Qubit, minus: Qubit) -> Measurement {
    Measurement::unchecked(
        q,
        Answer::range(2),
        vec![rank_one(2, 0, 1, plus), rank_one(2, 0, 1, minus)],
    )
}

/// Tilted-CHSH strategy on `cos θ|00⟩ + sin θ|11⟩`, θ ∈ (0, π/2).
pub fn tilted_chsh_ideal(theta: f64) -> Result<Strategy> {
    if !(theta > 0.0 && theta < FRAC_PI_2) {
        return Err(Error::Validation(format!("theta {theta} outside (0, pi/2)")));
    }
    tilted_chsh_any(theta)
}

/// Same construction, also accepting the product-state endpoint θ = 0.
pub(crate) fn tilted_chsh_any(theta: f64) -> Result<Strategy> {
    let (s, c) = theta.sin_cos();
    let state = PureState::from_schmidt(&[c, s], 2, 2)?;
    let mu = (2.0 * theta).sin().atan();
    let (b0p, b0m) = bob_pair(mu, 1.0);
    let (b1p, b1m) = bob_pair(mu, -1.0);
    let alice = vec![
        qubit_measurement(QuestionLabel::Index(0), Z_PLUS, Z_MINUS),
        qubit_measurement(QuestionLabel::Index(1), X_PLUS, X_MINUS),
    ];
    let bob = vec![
        qubit_measurement(QuestionLabel::Index(0), b0p, b0m),
        qubit_measurement(QuestionLabel::Index(1), b1p, b1m),
    ];
    Strategy::assemble(state, alice, bob)
}

/// One part of a direct-sum basis: a singleton or a 2×2 block.
enum Part {
    Single(usize),
    Pair {
        lo: usize,
        hi: usize,
        plus: Qubit,
        minus: Qubit,
    },
}

/// Measurement with one outcome per basis index; within a pair the `+1`
/// eigenvector takes label `lo` and the `−1` eigenvector label `hi`.
fn direct_sum(n: usize, q: QuestionLabel, parts: &[Part]) -> Measurement {
    let mut projectors = vec![CMatrix::zeros(n, n); n];
    for part in parts {
        match *part {
            Part::Single(k) => projectors[k] = basis_projector(n, k),
            Part::Pair { lo, hi, plus, minus } => {
                projectors[lo] = rank_one(n, lo, hi, plus);
                projectors[hi] = rank_one(n, lo, hi, minus);
            }
        }
    }
    Measurement::unchecked(q, Answer::range(n), projectors)
}

/// Many-answers strategy for odd `d`.
pub fn many_answers_ideal(state: &SchmidtState) -> Result<Strategy> {
    let d = state.d();
    if !Family::ManyAnswers.accepts(d) {
        return Err(Family::ManyAnswers.parity_error(d));
    }
    let blocks = (d - 1) / 2;
    let mu: Vec<f64> = (0..blocks)
        .map(|m| block_params(state, m, false).map(|b| b.mu))
        .collect::<Result<_>>()?;
    let mu_p: Vec<f64> = (0..blocks)
        .map(|m| block_params(state, m, true).map(|b| b.mu))
        .collect::<Result<_>>()?;

    let unprimed = |pair: &dyn Fn(usize) -> (Qubit, Qubit)| -> Vec<Part> {
        let mut parts: Vec<Part> = (0..blocks)
            .map(|m| {
                let (plus, minus) = pair(m);
                Part::Pair {
                    lo: 2 * m,
                    hi: 2 * m + 1,
                    plus,
                    minus,
                }
            })
            .collect();
        parts.push(Part::Single(d - 1));
        parts
    };
    let primed = |pair: &dyn Fn(usize) -> (Qubit, Qubit)| -> Vec<Part> {
        let mut parts = vec![Part::Single(0)];
        parts.extend((0..blocks).map(|m| {
            let (plus, minus) = pair(m);
            Part::Pair {
                lo: 2 * m + 1,
                hi: 2 * m + 2,
                plus,
                minus,
            }
        }));
        parts
    };

    let computational: Vec<Part> = (0..d).map(Part::Single).collect();
    let alice = vec![
        direct_sum(d, QuestionLabel::Index(0), &computational),
        direct_sum(d, QuestionLabel::Index(1), &unprimed(&|_| (X_PLUS, X_MINUS))),
        direct_sum(d, QuestionLabel::Index(2), &primed(&|_| (X_PLUS, X_MINUS))),
    ];
    let bob = vec![
        direct_sum(d, QuestionLabel::Index(0), &unprimed(&|m| bob_pair(mu[m], 1.0))),
        direct_sum(d, QuestionLabel::Index(1), &unprimed(&|m| bob_pair(mu[m], -1.0))),
        direct_sum(d, QuestionLabel::Index(2), &primed(&|m| bob_pair(mu_p[m], 1.0))),
        direct_sum(d, QuestionLabel::Index(3), &primed(&|m| bob_pair(mu_p[m], -1.0))),
    ];
    Strategy::assemble(state.pure_state(d)?, alice, bob)
}

/// Alice's answer alphabet `{0, 1, 2, ⊥}` in the many-questions family.
pub(crate) fn answers_a_mq() -> Vec<Answer> {
    vec![Answer::Value(0), Answer::Value(1), Answer::Value(2), Answer::Bottom]
}

/// Bob's answer alphabet `{0, 1, ⊥}` in the many-questions family.
pub(crate) fn answers_b_mq() -> Vec<Answer> {
    vec![Answer::Value(0), Answer::Value(1), Answer::Bottom]
}

/// Angle of the primed block, with `c_d = 0` past the end of an even-d state.
pub(crate) fn primed_params_mq(state: &SchmidtState, m: usize) -> Result<BlockParams> {
    if 2 * m + 2 < state.d() {
        block_params(state, m, true)
    } else if 2 * m + 1 < state.d() {
        Ok(BlockParams::from_theta_unchecked(m, 0.0))
    } else {
        Err(Error::BlockRange { m, d: state.d() })
    }
}

/// Many-questions strategy for even `d`, on local dimension `d + 1`
/// (the extra basis vector `|d⟩` carries zero amplitude).
pub fn many_questions_ideal(state: &SchmidtState) -> Result<Strategy> {
    let d = state.d();
    if !Family::ManyQuestions.accepts(d) {
        return Err(Family::ManyQuestions.parity_error(d));
    }
    let n = d + 1;
    let mut alice = Vec::new();
    let mut bob = Vec::new();
    for m in 0..d / 2 {
        let (k0, k1, k2) = (2 * m, 2 * m + 1, 2 * m + 2);
        let mu = block_params(state, m, false)?.mu;
        let mu_p = primed_params_mq(state, m)?.mu;

        let with_bottom = |mut ps: Vec<CMatrix>| {
            let rest = complement(n, &ps);
            ps.push(rest);
            ps
        };
        let a = |tag, ps| Measurement::unchecked(QuestionLabel::block(m, tag), answers_a_mq(), with_bottom(ps));
        alice.push(a(
            Tag::Z,
            vec![basis_projector(n, k0), basis_projector(n, k1), basis_projector(n, k2)],
        ));
        alice.push(a(
            Tag::X,
            vec![
                rank_one(n, k0, k1, X_PLUS),
                rank_one(n, k0, k1, X_MINUS),
                basis_projector(n, k2),
            ],
        ));
        alice.push(a(
            Tag::XPrime,
            vec![
                basis_projector(n, k0),
                rank_one(n, k1, k2, X_PLUS),
                rank_one(n, k1, k2, X_MINUS),
            ],
        ));

        let b = |tag, ps| Measurement::unchecked(QuestionLabel::block(m, tag), answers_b_mq(), with_bottom(ps));
        let pair = |lo, hi, mu, sign| {
            let (p, q) = bob_pair(mu, sign);
            vec![rank_one(n, lo, hi, p), rank_one(n, lo, hi, q)]
        };
        bob.push(b(Tag::Z, pair(k0, k1, mu, 1.0)));
        bob.push(b(Tag::X, pair(k0, k1, mu, -1.0)));
        bob.push(b(Tag::ZPrime, pair(k1, k2, mu_p, 1.0)));
        bob.push(b(Tag::XPrime, pair(k1, k2, mu_p, -1.0)));
        bob.push(b(Tag::Aux, vec![basis_projector(n, k0), basis_projector(n, k1)]));
    }
    Strategy::assemble(state.pure_state(n)?, alice, bob)
}

/// The ideal strategy of the family on `Ψ_N`.
pub fn truncated_separating_strategy(family: Family, n: usize) -> Result<Strategy> {
    if !family.accepts(n) {
        return Err(family.parity_error(n));
    }
    let state = psi_n(n)?;
    match family {
        Family::ManyAnswers => many_answers_ideal(&state),
        Family::ManyQuestions => many_questions_ideal(&state),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::make_state;

    fn all_measurements(s: &Strategy) -> impl Iterator<Item = &Measurement> {
        s.alice().iter().chain(s.bob())
    }

    #[test]
    fn builders_are_exact_projective() {
        let strategies = [
            tilted_chsh_ideal(0.3).unwrap(),
            many_answers_ideal(&make_state(&[1.0, 0.7, 0.4, 0.9, 0.2]).unwrap()).unwrap(),
            many_questions_ideal(&make_state(&[1.0, 0.5, 0.8, 0.3]).unwrap()).unwrap(),
        ];
        for s in &strategies {
            for m in all_measurements(s) {
                assert!(m.defect().unwrap() <= 1e-12, "{}", m.question());
            }
        }
    }

    #[test]
    fn parity_is_enforced() {
        let even = make_state(&[1.0, 1.0]).unwrap();
        let odd = make_state(&[1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(many_answers_ideal(&even), Err(Error::Parity { .. })));
        assert!(matches!(many_questions_ideal(&odd), Err(Error::Parity { .. })));
        assert!(truncated_separating_strategy(Family::ManyAnswers, 4).is_err());
        assert!(truncated_separating_strategy(Family::ManyQuestions, 5).is_err());
    }

    #[test]
    fn tilted_boundary_rejected() {
        assert!(tilted_chsh_ideal(0.0).is_err());
        assert!(tilted_chsh_ideal(FRAC_PI_2).is_err());
    }

    #[test]
    fn question_sets() {
        let s = many_questions_ideal(&make_state(&[1.0; 6]).unwrap()).unwrap();
        assert_eq!(s.alice().len(), 9);
        assert_eq!(s.bob().len(), 15);
        assert_eq!(s.dim_a(), 7);
        let s = truncated_separating_strategy(Family::ManyAnswers, 3).unwrap();
        assert_eq!(s, many_answers_ideal(&psi_n(3).unwrap()).unwrap());
        assert_eq!(s.questions_a().len(), 3);
        assert_eq!(s.questions_b().len(), 4);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let s = many_questions_ideal(&make_state(&[0.9, 0.31, 0.5, 0.77]).unwrap()).unwrap();
        let text = s.to_json().unwrap();
        let back = Strategy::from_json(&text).unwrap();
        assert_eq!(back, s);
    }
}
