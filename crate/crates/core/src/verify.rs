//! Entrywise verifiers of the two families' defining properties and the
//! tilted-CHSH block functional.

use serde::{Deserialize, Serialize};

use crate::correlation::{evaluate, Correlation};
use crate::error::{Error, Result};
use crate::states::{block_mass, block_params, BlockParams, SchmidtState};
use crate::strategy::{tilted_chsh_any, Answer, Family, QuestionLabel, Tag};

/// `T[x][y]` as row-major 2×2 tables over outcomes `{0, 1}`.
pub type TiltedTables = [[[f64; 4]; 2]; 2];

/// Tables of the ideal tilted-CHSH strategy at angle `θ ∈ [0, π/2)`.
pub fn tilted_tables(theta: f64) -> Result<TiltedTables> {
    let p = evaluate(&tilted_chsh_any(theta)?)?;
    let mut out = [[[0.0; 4]; 2]; 2];
    for (x, row) in out.iter_mut().enumerate() {
        for (y, t) in row.iter_mut().enumerate() {
            t.copy_from_slice(p.table(x, y));
        }
    }
    Ok(out)
}

/// Location of a constraint and its deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub x: QuestionLabel,
    pub y: QuestionLabel,
    pub a: Option<Answer>,
    pub b: Option<Answer>,
    pub expected: f64,
    pub actual: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub family: Family,
    pub tol: f64,
    pub checks: usize,
    pub max_residual: f64,
    pub passed: bool,
    /// Constraint attaining the maximal residual.
    pub worst: Option<Violation>,
    /// First constraint exceeding the tolerance, in checking order.
    pub first_violation: Option<Violation>,
}

struct Checker {
    tol: f64,
    checks: usize,
    worst: Option<Violation>,
    first: Option<Violation>,
}

impl Checker {
    fn new(tol: f64) -> Self {
        Checker {
            tol,
            checks: 0,
            worst: None,
            first: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn check(
        &mut self,
        rule: &str,
        x: QuestionLabel,
        y: QuestionLabel,
        a: Option<Answer>,
        b: Option<Answer>,
        expected: f64,
        actual: f64,
    ) {
        self.checks += 1;
        let residual = (expected - actual).abs();
        let v = || Violation {
            rule: rule.to_string(),
            x,
            y,
            a,
            b,
            expected,
            actual,
            residual,
        };
        if self.worst.as_ref().is_none_or(|w| residual > w.residual) {
            self.worst = Some(v());
        }
        if self.first.is_none() && !(residual <= self.tol) {
            self.first = Some(v());
        }
    }

    fn finish(self, family: Family) -> VerifyReport {
        let max_residual = self.worst.as_ref().map_or(0.0, |w| w.residual);
        VerifyReport {
            family,
            tol: self.tol,
            checks: self.checks,
            max_residual,
            passed: self.first.is_none(),
            worst: self.worst,
            first_violation: self.first,
        }
    }
}

fn require_values(set: &[Answer]) -> Result<Vec<usize>> {
    set.iter()
        .map(|a| {
            a.value()
                .ok_or_else(|| Error::SetMismatch("many-answers sets are numeric".into()))
        })
        .collect()
}

/// Checks the block tables of the many-answers family for odd `d`:
/// block-diagonal `T_xy`, x,y ∈ {0,1}, with corner `c_{d−1}²`, and the
/// shifted tables for x ∈ {0,2}, y ∈ {2,3} with corner `c_0²`.
pub fn verify_many_answers(p: &Correlation, state: &SchmidtState, tol: f64) -> Result<VerifyReport> {
    let d = state.d();
    if !Family::ManyAnswers.accepts(d) {
        return Err(Family::ManyAnswers.parity_error(d));
    }
    let av = require_values(p.answers_a())?;
    let bv = require_values(p.answers_b())?;
    for v in 0..d {
        if !av.contains(&v) || !bv.contains(&v) {
            return Err(Error::SetMismatch(format!("answer {v} missing")));
        }
    }
    let c = state.c();
    let blocks = (d - 1) / 2;
    let mut unprimed = Vec::with_capacity(blocks);
    let mut primed = Vec::with_capacity(blocks);
    for m in 0..blocks {
        unprimed.push((
            block_mass(state, m, false)?,
            tilted_tables(block_params(state, m, false)?.theta)?,
        ));
        primed.push((
            block_mass(state, m, true)?,
            tilted_tables(block_params(state, m, true)?.theta)?,
        ));
    }

    let mut ck = Checker::new(tol);
    let q = QuestionLabel::Index;
    let mut sweep = |x: usize, y: usize, rule: &str, expected: &dyn Fn(usize, usize) -> f64| -> Result<()> {
        let (xi, yi) = p.pair_index(q(x), q(y))?;
        for (ai, &a) in av.iter().enumerate() {
            for (bi, &b) in bv.iter().enumerate() {
                ck.check(
                    rule,
                    q(x),
                    q(y),
                    Some(Answer::Value(a)),
                    Some(Answer::Value(b)),
                    expected(a, b),
                    p.entry(xi, yi, ai, bi),
                );
            }
        }
        Ok(())
    };

    for x in 0..2 {
        for y in 0..2 {
            sweep(x, y, "block-diagonal", &|a, b| {
                if a + 1 < d && b + 1 < d && a / 2 == b / 2 {
                    let (mass, t) = &unprimed[a / 2];
                    mass * t[x][y][(a % 2) * 2 + b % 2]
                } else if a == d - 1 && b == d - 1 {
                    c[d - 1] * c[d - 1]
                } else {
                    0.0
                }
            })?;
        }
    }
    for (x, f) in [(0, 0), (2, 1)] {
        for (y, g) in [(2, 0), (3, 1)] {
            sweep(x, y, "shifted block-diagonal", &|a, b| {
                if a >= 1 && b >= 1 && a < d && b < d && (a - 1) / 2 == (b - 1) / 2 {
                    let (mass, t) = &primed[(a - 1) / 2];
                    mass * t[f][g][((a - 1) % 2) * 2 + (b - 1) % 2]
                } else if a == 0 && b == 0 {
                    c[0] * c[0]
                } else {
                    0.0
                }
            })?;
        }
    }
    Ok(ck.finish(Family::ManyAnswers))
}

/// Checks properties (i)–(iv) of the many-questions family for even `d`.
pub fn verify_many_questions(p: &Correlation, state: &SchmidtState, tol: f64) -> Result<VerifyReport> {
    let d = state.d();
    if !Family::ManyQuestions.accepts(d) {
        return Err(Family::ManyQuestions.parity_error(d));
    }
    let c = state.c();
    let w = |i: usize| if i < d { c[i] * c[i] } else { 0.0 };
    let v = Answer::Value;
    let bot = Answer::Bottom;
    let a_set = [v(0), v(1), v(2), bot];
    let b_set = [v(0), v(1), bot];
    let mut ck = Checker::new(tol);
    let bq = QuestionLabel::block;

    for m in 0..d / 2 {
        let mass = w(2 * m) + w(2 * m + 1);
        let t = tilted_tables(block_params(state, m, false)?.theta)?;
        let mass_p = w(2 * m + 1) + w(2 * m + 2);
        let t_p = tilted_tables(c.get(2 * m + 2).map_or(0.0, |hi| hi.atan2(c[2 * m + 1])))?;

        for (xt, f) in [(Tag::Z, 0), (Tag::X, 1)] {
            for (yt, g) in [(Tag::Z, 0), (Tag::X, 1)] {
                let (x, y) = (bq(m, xt), bq(m, yt));
                for a in a_set {
                    for b in b_set {
                        let expected = match (a, b) {
                            (Answer::Value(i @ 0..=1), Answer::Value(j)) => mass * t[f][g][i * 2 + j],
                            (Answer::Value(2) | Answer::Bottom, Answer::Bottom) => continue,
                            _ => 0.0,
                        };
                        ck.check("(i)", x, y, Some(a), Some(b), expected, p.p(x, y, a, b)?);
                    }
                }
            }
        }
        for (xt, f) in [(Tag::Z, 0), (Tag::XPrime, 1)] {
            for (yt, g) in [(Tag::ZPrime, 0), (Tag::XPrime, 1)] {
                let (x, y) = (bq(m, xt), bq(m, yt));
                for a in a_set {
                    for b in b_set {
                        let expected = match (a, b) {
                            (Answer::Value(i @ 1..=2), Answer::Value(j)) => mass_p * t_p[f][g][(i - 1) * 2 + j],
                            (Answer::Value(0) | Answer::Bottom, Answer::Bottom) => continue,
                            _ => 0.0,
                        };
                        ck.check("(ii)", x, y, Some(a), Some(b), expected, p.p(x, y, a, b)?);
                    }
                }
            }
        }
    }

    for m in 0..(d / 2).saturating_sub(1) {
        let target = w(2 * m + 2);
        let (zm, zn, aux) = (bq(m, Tag::Z), bq(m + 1, Tag::Z), bq(m + 1, Tag::Aux));
        for &y in p.questions_b() {
            ck.check(
                "(iii) p(a=2|(m,Z))",
                zm,
                y,
                Some(v(2)),
                None,
                target,
                p.marginal_a(zm, y, v(2))?,
            );
            ck.check(
                "(iii) p(a=0|(m+1,Z))",
                zn,
                y,
                Some(v(0)),
                None,
                target,
                p.marginal_a(zn, y, v(0))?,
            );
        }
        for &x in p.questions_a() {
            ck.check(
                "(iii) p(b=0|(m+1,Aux))",
                x,
                aux,
                None,
                Some(v(0)),
                target,
                p.marginal_b(x, aux, v(0))?,
            );
        }
        ck.check(
            "(iii) p(2,0)",
            zm,
            aux,
            Some(v(2)),
            Some(v(0)),
            target,
            p.p(zm, aux, v(2), v(0))?,
        );
        ck.check(
            "(iii) p(0,0)",
            zn,
            aux,
            Some(v(0)),
            Some(v(0)),
            target,
            p.p(zn, aux, v(0), v(0))?,
        );
    }

    for m in 0..d / 2 {
        for m2 in (0..d / 2).filter(|&k| k != m) {
            let (x, y) = (bq(m, Tag::Z), bq(m2, Tag::Aux));
            for a in 0..2 {
                for b in 0..2 {
                    ck.check("(iv)", x, y, Some(v(a)), Some(v(b)), 0.0, p.p(x, y, v(a), v(b))?);
                }
            }
        }
    }
    Ok(ck.finish(Family::ManyQuestions))
}

/// A question with the outcomes relabeled `+1` and `−1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinaryQuestion {
    pub question: QuestionLabel,
    pub plus: Answer,
    pub minus: Answer,
}

/// Questions playing `A_0, A_1, B_0, B_1` for one block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuestionMap {
    pub alice: [BinaryQuestion; 2],
    pub bob: [BinaryQuestion; 2],
}

fn bin(question: QuestionLabel, plus: usize, minus: usize) -> BinaryQuestion {
    BinaryQuestion {
        question,
        plus: Answer::Value(plus),
        minus: Answer::Value(minus),
    }
}

impl QuestionMap {
    /// The bare tilted-CHSH strategy.
    pub fn tilted() -> Self {
        let q = QuestionLabel::Index;
        QuestionMap {
            alice: [bin(q(0), 0, 1), bin(q(1), 0, 1)],
            bob: [bin(q(0), 0, 1), bin(q(1), 0, 1)],
        }
    }

    pub fn many_answers(m: usize, primed: bool) -> Self {
        let q = QuestionLabel::Index;
        let (lo, hi) = crate::states::block_indices(m, primed);
        let (x1, y0, y1) = if primed { (2, 2, 3) } else { (1, 0, 1) };
        QuestionMap {
            alice: [bin(q(0), lo, hi), bin(q(x1), lo, hi)],
            bob: [bin(q(y0), lo, hi), bin(q(y1), lo, hi)],
        }
    }

    pub fn many_questions(m: usize, primed: bool) -> Self {
        let q = QuestionLabel::block;
        if primed {
            QuestionMap {
                alice: [bin(q(m, Tag::Z), 1, 2), bin(q(m, Tag::XPrime), 1, 2)],
                bob: [bin(q(m, Tag::ZPrime), 0, 1), bin(q(m, Tag::XPrime), 0, 1)],
            }
        } else {
            QuestionMap {
                alice: [bin(q(m, Tag::Z), 0, 1), bin(q(m, Tag::X), 0, 1)],
                bob: [bin(q(m, Tag::Z), 0, 1), bin(q(m, Tag::X), 0, 1)],
            }
        }
    }

    pub fn for_family(family: Family, m: usize, primed: bool) -> Self {
        match family {
            Family::ManyAnswers => Self::many_answers(m, primed),
            Family::ManyQuestions => Self::many_questions(m, primed),
        }
    }
}

fn signed(q: &BinaryQuestion) -> [(Answer, f64); 2] {
    [(q.plus, 1.0), (q.minus, -1.0)]
}

/// `s·α⟨A_0⟩ + ⟨A_0B_0⟩ + ⟨A_0B_1⟩ + ⟨A_1B_0⟩ − ⟨A_1B_1⟩` restricted to the
/// block's outcomes, with `s·α = block.signed_alpha()`.
pub fn bell_value(p: &Correlation, block: &BlockParams, map: &QuestionMap) -> Result<f64> {
    let corr = |i: usize, j: usize| -> Result<f64> {
        let (a, b) = (&map.alice[i], &map.bob[j]);
        let mut e = 0.0;
        for (oa, sa) in signed(a) {
            for (ob, sb) in signed(b) {
                e += sa * sb * p.p(a.question, b.question, oa, ob)?;
            }
        }
        Ok(e)
    };
    let a0 = &map.alice[0];
    let b0 = &map.bob[0];
    let mut marginal = 0.0;
    for (oa, sa) in signed(a0) {
        for (ob, _) in signed(b0) {
            marginal += sa * p.p(a0.question, b0.question, oa, ob)?;
        }
    }
    Ok(block.signed_alpha() * marginal + corr(0, 0)? + corr(0, 1)? + corr(1, 0)? - corr(1, 1)?)
}

/// Local deterministic correlation with the sets of `template`: with weight
/// `mass` the block questions answer by `assignment` (`true` = plus) and all
/// other questions answer `outside`; the remaining weight answers `outside`.
pub fn classical_block_correlation(
    template: &Correlation,
    map: &QuestionMap,
    assignment: [bool; 4],
    mass: f64,
    outside: (Answer, Answer),
) -> Result<Correlation> {
    let pick = |q: &BinaryQuestion, plus: bool| if plus { q.plus } else { q.minus };
    let answer_a = |x: QuestionLabel| {
        map.alice
            .iter()
            .zip(&assignment[..2])
            .find(|(q, _)| q.question == x)
            .map_or(outside.0, |(q, &s)| pick(q, s))
    };
    let answer_b = |y: QuestionLabel| {
        map.bob
            .iter()
            .zip(&assignment[2..])
            .find(|(q, _)| q.question == y)
            .map_or(outside.1, |(q, &s)| pick(q, s))
    };
    let (na, nb) = (template.answers_a().len(), template.answers_b().len());
    let idx = |set: &[Answer], v: Answer| {
        set.iter()
            .position(|&u| u == v)
            .ok_or_else(|| Error::SetMismatch(format!("answer {v} absent")))
    };
    let out_a = idx(template.answers_a(), outside.0)?;
    let out_b = idx(template.answers_b(), outside.1)?;
    let mut tables = Vec::new();
    for &x in template.questions_a() {
        for &y in template.questions_b() {
            let mut t = vec![0.0; na * nb];
            let (ai, bi) = (
                idx(template.answers_a(), answer_a(x))?,
                idx(template.answers_b(), answer_b(y))?,
            );
            t[ai * nb + bi] += mass;
            t[out_a * nb + out_b] += 1.0 - mass;
            tables.extend(t);
        }
    }
    Correlation::new(
        template.questions_a().to_vec(),
        template.questions_b().to_vec(),
        template.answers_a().to_vec(),
        template.answers_b().to_vec(),
        tables,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_state, psi_n};
    use crate::strategy::{many_answers_ideal, many_questions_ideal, perturb, tilted_chsh_ideal};
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn chsh_value_at_pi_over_four() {
        let p = evaluate(&tilted_chsh_ideal(FRAC_PI_4).unwrap()).unwrap();
        let b = BlockParams::from_theta(0, FRAC_PI_4).unwrap();
        let v = bell_value(&p, &b, &QuestionMap::tilted()).unwrap();
        assert!((v - 8f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn tilted_value_for_several_angles() {
        for theta in [0.1, 0.4, 0.7, 1.0, 1.3] {
            let p = evaluate(&tilted_chsh_ideal(theta).unwrap()).unwrap();
            let b = BlockParams::from_theta(0, theta).unwrap();
            let v = bell_value(&p, &b, &QuestionMap::tilted()).unwrap();
            assert!((v - b.quantum_max()).abs() < 1e-10, "theta {theta}");
        }
    }

    #[test]
    fn ideal_many_answers_verifies() {
        let s = psi_n(3).unwrap();
        let p = evaluate(&many_answers_ideal(&s).unwrap()).unwrap();
        let r = verify_many_answers(&p, &s, 1e-10).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.max_residual <= 1e-10);
    }

    #[test]
    fn perturbation_is_detected() {
        let s = make_state(&[1.0, 0.8, 0.6]).unwrap();
        let p = evaluate(&perturb(&many_answers_ideal(&s).unwrap(), 1e-3, 5)).unwrap();
        let r = verify_many_answers(&p, &s, 1e-10).unwrap();
        assert!(r.max_residual > 1e-6);
        assert!(!r.passed && r.first_violation.is_some());
    }

    #[test]
    fn many_questions_d4_entries() {
        let s = make_state(&[1.0, 0.9, 0.7, 0.4]).unwrap();
        let p = evaluate(&many_questions_ideal(&s).unwrap()).unwrap();
        let r = verify_many_questions(&p, &s, 1e-10).unwrap();
        assert!(r.passed, "{r:?}");
        let z0 = QuestionLabel::block(0, Tag::Z);
        let aux1 = QuestionLabel::block(1, Tag::Aux);
        let p2 = p.marginal_a(z0, aux1, Answer::Value(2)).unwrap();
        assert!((p2 - s.c()[2] * s.c()[2]).abs() < 1e-14);
        assert!(p.p(z0, aux1, Answer::Value(0), Answer::Value(0)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn coarse_perturbation_detected_many_questions() {
        let s = make_state(&[1.0, 0.9, 0.7, 0.4]).unwrap();
        let p = evaluate(&perturb(&many_questions_ideal(&s).unwrap(), 1e-2, 1)).unwrap();
        let r = verify_many_questions(&p, &s, 1e-10).unwrap();
        assert!(r.max_residual >= 1e-4);
    }
}
