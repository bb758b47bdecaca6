//! Correlation tables, their distance, lifts and the separating limits.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, PureState, C64, DEFAULT_MAX_DIM};
use crate::states::{psi_infinity_tail, psi_infinity_weight};
use crate::strategy::{truncated_separating_strategy, Answer, Family, PovmStrategy, QuestionLabel, Strategy, Tag};

/// Tolerance applied by file readers to table sums.
pub const READ_SUM_TOL: f64 = 1e-8;

/// Conditional distributions `p(a,b|x,y)` over finite labeled sets.
#[derive(Clone, Debug, PartialEq)]
pub struct Correlation {
    x: Vec<QuestionLabel>,
    y: Vec<QuestionLabel>,
    a: Vec<Answer>,
    b: Vec<Answer>,
    // [x][y][a][b], row-major
    tables: Vec<f64>,
}

impl Correlation {
    /// Builds a correlation; entries must lie in `[−1e-12, 1+1e-12]` and
    /// every table must sum to 1 within 1e-10.
    pub fn new(
        x: Vec<QuestionLabel>,
        y: Vec<QuestionLabel>,
        a: Vec<Answer>,
        b: Vec<Answer>,
        tables: Vec<f64>,
    ) -> Result<Self> {
        Self::with_tolerance(x, y, a, b, tables, 1e-10)
    }

    pub fn with_tolerance(
        x: Vec<QuestionLabel>,
        y: Vec<QuestionLabel>,
        a: Vec<Answer>,
        b: Vec<Answer>,
        tables: Vec<f64>,
        sum_tol: f64,
    ) -> Result<Self> {
        let c = Correlation { x, y, a, b, tables };
        if c.tables.len() != c.x.len() * c.y.len() * c.a.len() * c.b.len() {
            return Err(Error::Dimension("table size does not match label sets".into()));
        }
        if c.x.is_empty() || c.y.is_empty() || c.a.is_empty() || c.b.is_empty() {
            return Err(Error::Validation("empty label set".into()));
        }
        for (name, labels) in [("X", &c.x), ("Y", &c.y)] {
            let mut sorted = labels.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != labels.len() {
                return Err(Error::Validation(format!("duplicate labels in {name}")));
            }
        }
        for (name, labels) in [("A", &c.a), ("B", &c.b)] {
            let mut sorted = labels.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != labels.len() {
                return Err(Error::Validation(format!("duplicate labels in {name}")));
            }
        }
        if let Some(v) = c.tables.iter().find(|v| !(**v >= -1e-12 && **v <= 1.0 + 1e-12)) {
            return Err(Error::Validation(format!("probability {v} out of range")));
        }
        for xi in 0..c.x.len() {
            for yi in 0..c.y.len() {
                let s: f64 = c.table(xi, yi).iter().sum();
                if (s - 1.0).abs() > sum_tol {
                    return Err(Error::Validation(format!(
                        "table ({}, {}) sums to {s}",
                        c.x[xi], c.y[yi]
                    )));
                }
            }
        }
        Ok(c)
    }

    pub fn questions_a(&self) -> &[QuestionLabel] {
        &self.x
    }

    pub fn questions_b(&self) -> &[QuestionLabel] {
        &self.y
    }

    pub fn answers_a(&self) -> &[Answer] {
        &self.a
    }

    pub fn answers_b(&self) -> &[Answer] {
        &self.b
    }

    fn table_len(&self) -> usize {
        self.a.len() * self.b.len()
    }

    /// Row-major table of question pair `(xi, yi)` by position.
    pub fn table(&self, xi: usize, yi: usize) -> &[f64] {
        let len = self.table_len();
        let start = (xi * self.y.len() + yi) * len;
        &self.tables[start..start + len]
    }

    pub fn entry(&self, xi: usize, yi: usize, ai: usize, bi: usize) -> f64 {
        self.table(xi, yi)[ai * self.b.len() + bi]
    }

    pub fn index_x(&self, q: QuestionLabel) -> Option<usize> {
        self.x.iter().position(|&v| v == q)
    }

    pub fn index_y(&self, q: QuestionLabel) -> Option<usize> {
        self.y.iter().position(|&v| v == q)
    }

    pub fn index_a(&self, a: Answer) -> Option<usize> {
        self.a.iter().position(|&v| v == a)
    }

    pub fn index_b(&self, b: Answer) -> Option<usize> {
        self.b.iter().position(|&v| v == b)
    }

    /// `p(a,b|x,y)`; labels absent from the answer sets have probability 0.
    pub fn p(&self, x: QuestionLabel, y: QuestionLabel, a: Answer, b: Answer) -> Result<f64> {
        let (xi, yi) = self.pair_index(x, y)?;
        Ok(match (self.index_a(a), self.index_b(b)) {
            (Some(ai), Some(bi)) => self.entry(xi, yi, ai, bi),
            _ => 0.0,
        })
    }

    pub fn pair_index(&self, x: QuestionLabel, y: QuestionLabel) -> Result<(usize, usize)> {
        match (self.index_x(x), self.index_y(y)) {
            (Some(xi), Some(yi)) => Ok((xi, yi)),
            _ => Err(Error::SetMismatch(format!("question pair ({x}, {y}) not present"))),
        }
    }

    /// Alice's marginal `p(a|x)` computed from the table with question `y`.
    pub fn marginal_a(&self, x: QuestionLabel, y: QuestionLabel, a: Answer) -> Result<f64> {
        let (xi, yi) = self.pair_index(x, y)?;
        Ok(match self.index_a(a) {
            Some(ai) => (0..self.b.len()).map(|bi| self.entry(xi, yi, ai, bi)).sum(),
            None => 0.0,
        })
    }

    /// Bob's marginal `p(b|y)` computed from the table with question `x`.
    pub fn marginal_b(&self, x: QuestionLabel, y: QuestionLabel, b: Answer) -> Result<f64> {
        let (xi, yi) = self.pair_index(x, y)?;
        Ok(match self.index_b(b) {
            Some(bi) => (0..self.a.len()).map(|ai| self.entry(xi, yi, ai, bi)).sum(),
            None => 0.0,
        })
    }

    /// Keeps only the listed answers, which must carry all the mass.
    pub fn restrict_answers(&self, a: &[Answer], b: &[Answer]) -> Result<Correlation> {
        let ai: Vec<usize> = a
            .iter()
            .map(|&v| {
                self.index_a(v)
                    .ok_or_else(|| Error::SetMismatch(format!("answer {v} absent")))
            })
            .collect::<Result<_>>()?;
        let bi: Vec<usize> = b
            .iter()
            .map(|&v| {
                self.index_b(v)
                    .ok_or_else(|| Error::SetMismatch(format!("answer {v} absent")))
            })
            .collect::<Result<_>>()?;
        let mut tables = Vec::with_capacity(self.x.len() * self.y.len() * a.len() * b.len());
        for xi in 0..self.x.len() {
            for yi in 0..self.y.len() {
                for &i in &ai {
                    for &j in &bi {
                        tables.push(self.entry(xi, yi, i, j));
                    }
                }
            }
        }
        Correlation::new(self.x.clone(), self.y.clone(), a.to_vec(), b.to_vec(), tables)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CorrelationDoc::from(self))?)
    }

    /// Parses JSON, rejecting tables whose sums deviate from 1 by more than 1e-8.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CorrelationDoc = serde_json::from_str(text)?;
        doc.into_correlation()
    }

    /// One row per `(x, y, a, b, value)`, values with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "a", "b", "value"]).map_err(csv_err)?;
        for (xi, x) in self.x.iter().enumerate() {
            for (yi, y) in self.y.iter().enumerate() {
                for (ai, a) in self.a.iter().enumerate() {
                    for (bi, b) in self.b.iter().enumerate() {
                        w.write_record([
                            x.to_string(),
                            y.to_string(),
                            a.to_string(),
                            b.to_string(),
                            format!("{:.16e}", self.entry(xi, yi, ai, bi)),
                        ])
                        .map_err(csv_err)?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads CSV written by [`Correlation::write_csv`]. Label sets are taken in
    /// order of first appearance; missing cells are an error.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut cells = BTreeMap::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != 5 {
                return Err(Error::Parse("expected 5 columns".into()));
            }
            let q: QuestionLabel = rec[0].parse()?;
            let s: QuestionLabel = rec[1].parse()?;
            let u: Answer = rec[2].parse()?;
            let v: Answer = rec[3].parse()?;
            let val: f64 = rec[4]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad value {:?}", &rec[4])))?;
            push_new(&mut x, q);
            push_new(&mut y, s);
            push_new(&mut a, u);
            push_new(&mut b, v);
            if cells.insert((q, s, u, v), val).is_some() {
                return Err(Error::Parse(format!("duplicate cell ({q},{s},{u},{v})")));
            }
        }
        let mut tables = Vec::with_capacity(cells.len());
        for &q in &x {
            for &s in &y {
                for &u in &a {
                    for &v in &b {
                        let val = cells
                            .get(&(q, s, u, v))
                            .ok_or_else(|| Error::Parse(format!("missing cell ({q},{s},{u},{v})")))?;
                        tables.push(*val);
                    }
                }
            }
        }
        Correlation::with_tolerance(x, y, a, b, tables, READ_SUM_TOL)
    }
}

fn push_new<T: PartialEq>(v: &mut Vec<T>, item: T) {
    if !v.contains(&item) {
        v.push(item);
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

#[derive(Serialize, Deserialize)]
struct CorrelationDoc {
    #[serde(rename = "X")]
    x: Vec<QuestionLabel>,
    #[serde(rename = "Y")]
    y: Vec<QuestionLabel>,
    #[serde(rename = "A")]
    a: Vec<Answer>,
    #[serde(rename = "B")]
    b: Vec<Answer>,
    tables: BTreeMap<String, Vec<f64>>,
}

fn pair_key(x: QuestionLabel, y: QuestionLabel) -> String {
    format!("{x}|{y}")
}

impl From<&Correlation> for CorrelationDoc {
    fn from(c: &Correlation) -> Self {
        let mut tables = BTreeMap::new();
        for (xi, &x) in c.x.iter().enumerate() {
            for (yi, &y) in c.y.iter().enumerate() {
                tables.insert(pair_key(x, y), c.table(xi, yi).to_vec());
            }
        }
        CorrelationDoc {
            x: c.x.clone(),
            y: c.y.clone(),
            a: c.a.clone(),
            b: c.b.clone(),
            tables,
        }
    }
}

impl CorrelationDoc {
    fn into_correlation(mut self) -> Result<Correlation> {
        let len = self.a.len() * self.b.len();
        let mut flat = Vec::with_capacity(self.x.len() * self.y.len() * len);
        for &x in &self.x {
            for &y in &self.y {
                let t = self
                    .tables
                    .remove(&pair_key(x, y))
                    .ok_or_else(|| Error::Parse(format!("missing table for ({x}, {y})")))?;
                if t.len() != len {
                    return Err(Error::Parse(format!("table ({x}, {y}) has {} entries", t.len())));
                }
                flat.extend(t);
            }
        }
        if let Some(k) = self.tables.keys().next() {
            return Err(Error::Parse(format!("unexpected table {k}")));
        }
        Correlation::with_tolerance(self.x, self.y, self.a, self.b, flat, READ_SUM_TOL)
    }
}

/// Dense row-major copy of a complex matrix, for the evaluation loops.
struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Dense {
    fn from(m: &CMatrix) -> Self {
        let (rows, cols) = (m.rows(), m.cols());
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m.get(i, j));
            }
        }
        Dense { rows, cols, data }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }
}

fn is_zero(z: C64) -> bool {
    z.re == 0.0 && z.im == 0.0
}

/// `W = M† A M` for coefficient matrix `M`, summed in ascending index order
/// with exact zeros skipped.
fn reduce_alice(m: &Dense, a: &Dense) -> Dense {
    let (da, db) = (m.rows, m.cols);
    let mut t = vec![C64::new(0.0, 0.0); da * db];
    for i in 0..da {
        for k in 0..da {
            let aik = a.at(i, k);
            if is_zero(aik) {
                continue;
            }
            for l in 0..db {
                let mkl = m.at(k, l);
                if !is_zero(mkl) {
                    t[i * db + l] += aik * mkl;
                }
            }
        }
    }
    let mut w = vec![C64::new(0.0, 0.0); db * db];
    for j in 0..db {
        for i in 0..da {
            let mij = m.at(i, j);
            if is_zero(mij) {
                continue;
            }
            let c = mij.conj();
            for l in 0..db {
                let til = t[i * db + l];
                if !is_zero(til) {
                    w[j * db + l] += c * til;
                }
            }
        }
    }
    Dense {
        rows: db,
        cols: db,
        data: w,
    }
}

/// `Σ_{jl} W_{jl} B_{jl}`, real part.
fn pair_value(w: &Dense, b: &Dense) -> f64 {
    let mut acc = 0.0;
    for (wv, bv) in w.data.iter().zip(&b.data) {
        if !is_zero(*wv) && !is_zero(*bv) {
            acc += (wv * bv).re;
        }
    }
    acc
}

/// Operator lists per question; `None` stands for the zero operator.
type OpList<'a> = Vec<Option<&'a CMatrix>>;

/// Fills `p(a,b|x,y) = ⟨ψ|A ⊗ B|ψ⟩` for all questions and answers.
fn correlate(state: &PureState, alice: &[OpList<'_>], bob: &[OpList<'_>]) -> Result<Vec<f64>> {
    let coeff = state.coefficient_matrix(1)?;
    let (da, db) = (coeff.rows(), coeff.cols());
    for ops in alice {
        if ops.iter().flatten().any(|a| a.rows() != da || a.cols() != da) {
            return Err(Error::Dimension("Alice operator does not match the state".into()));
        }
    }
    for ops in bob {
        if ops.iter().flatten().any(|b| b.rows() != db || b.cols() != db) {
            return Err(Error::Dimension("Bob operator does not match the state".into()));
        }
    }
    let m = Dense::from(&coeff);
    let reduced: Vec<Vec<Option<Dense>>> = alice
        .par_iter()
        .map(|ops| {
            ops.iter()
                .map(|a| a.map(|a| reduce_alice(&m, &Dense::from(a))))
                .collect()
        })
        .collect();
    let bob_dense: Vec<Vec<Option<Dense>>> = bob
        .iter()
        .map(|ops| ops.iter().map(|b| b.map(Dense::from)).collect())
        .collect();
    let per_pair: Vec<Vec<f64>> = (0..alice.len() * bob.len())
        .into_par_iter()
        .map(|k| {
            let (xi, yi) = (k / bob.len(), k % bob.len());
            let mut t = Vec::new();
            for w in &reduced[xi] {
                for b in &bob_dense[yi] {
                    t.push(match (w, b) {
                        (Some(w), Some(b)) => pair_value(w, b),
                        _ => 0.0,
                    });
                }
            }
            t
        })
        .collect();
    Ok(per_pair.into_iter().flatten().collect())
}

/// `p(a,b|x,y) = ⟨ψ|A^a_x ⊗ B^b_y|ψ⟩`.
pub fn evaluate(strategy: &Strategy) -> Result<Correlation> {
    let alice: Vec<OpList<'_>> = strategy
        .alice()
        .iter()
        .map(|m| m.projectors().iter().map(Some).collect())
        .collect();
    let bob: Vec<OpList<'_>> = strategy
        .bob()
        .iter()
        .map(|m| m.projectors().iter().map(Some).collect())
        .collect();
    let tables = correlate(strategy.state(), &alice, &bob)?;
    Correlation::new(
        strategy.questions_a(),
        strategy.questions_b(),
        strategy.answers_a().to_vec(),
        strategy.answers_b().to_vec(),
        tables,
    )
}

/// Correlation of a POVM strategy.
pub fn evaluate_povm(strategy: &PovmStrategy) -> Result<Correlation> {
    let alice: Vec<OpList<'_>> = strategy
        .alice
        .iter()
        .map(|m| m.effects().iter().map(Some).collect())
        .collect();
    let bob: Vec<OpList<'_>> = strategy
        .bob
        .iter()
        .map(|m| m.effects().iter().map(Some).collect())
        .collect();
    let tables = correlate(&strategy.state, &alice, &bob)?;
    let first_a = strategy
        .alice
        .first()
        .ok_or_else(|| Error::Validation("no Alice measurements".into()))?;
    let first_b = strategy
        .bob
        .first()
        .ok_or_else(|| Error::Validation("no Bob measurements".into()))?;
    Correlation::new(
        strategy.alice.iter().map(|m| m.question()).collect(),
        strategy.bob.iter().map(|m| m.question()).collect(),
        first_a.outcomes().to_vec(),
        first_b.outcomes().to_vec(),
        tables,
    )
}

/// L1 distance of one question pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub x: QuestionLabel,
    pub y: QuestionLabel,
    pub l1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub value: f64,
    pub argmax: (QuestionLabel, QuestionLabel),
    pub per_pair: Vec<PairDistance>,
}

/// L1 distance of two normalized tables. The largest entry of `p + q` is
/// replaced by its complement, which is exact for normalized tables and keeps
/// rounding on entries near 1 out of the result.
pub fn table_l1(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let r = (0..p.len())
        .max_by(|&i, &j| (p[i] + q[i]).total_cmp(&(p[j] + q[j])).then(j.cmp(&i)))
        .unwrap_or(0);
    let mut signed = 0.0;
    let mut absolute = 0.0;
    for k in 0..p.len() {
        if k != r {
            let diff = p[k] - q[k];
            signed += diff;
            absolute += diff.abs();
        }
    }
    signed.abs() + absolute
}

/// `sup_{x,y} Σ_{a,b} |p − q|`.
pub fn distance(p: &Correlation, q: &Correlation) -> Result<DistanceReport> {
    if p.x != q.x || p.y != q.y {
        return Err(Error::SetMismatch("question sets differ".into()));
    }
    if p.a != q.a || p.b != q.b {
        return Err(Error::SetMismatch("answer sets differ".into()));
    }
    let mut per_pair = Vec::with_capacity(p.x.len() * p.y.len());
    let mut best = (0usize, f64::NEG_INFINITY);
    for xi in 0..p.x.len() {
        for yi in 0..p.y.len() {
            let l1 = table_l1(p.table(xi, yi), q.table(xi, yi));
            if l1 > best.1 {
                best = (per_pair.len(), l1);
            }
            per_pair.push(PairDistance {
                x: p.x[xi],
                y: p.y[yi],
                l1,
            });
        }
    }
    let arg = &per_pair[best.0];
    Ok(DistanceReport {
        value: best.1,
        argmax: (arg.x, arg.y),
        per_pair,
    })
}

/// Zero-pads the answer sets to `{0, …, cutoff−1}` on both sides.
pub fn lift_answers(p: &Correlation, cutoff: usize) -> Result<Correlation> {
    let values = |set: &[Answer]| -> Result<Vec<usize>> {
        set.iter()
            .map(|a| {
                a.value()
                    .ok_or_else(|| Error::Validation("cannot lift the ⊥ answer".into()))
            })
            .collect()
    };
    let av = values(&p.a)?;
    let bv = values(&p.b)?;
    if av.iter().chain(&bv).any(|&v| v >= cutoff) {
        return Err(Error::Validation(format!("cutoff {cutoff} below an existing answer")));
    }
    let mut tables = vec![0.0; p.x.len() * p.y.len() * cutoff * cutoff];
    for xi in 0..p.x.len() {
        for yi in 0..p.y.len() {
            let base = (xi * p.y.len() + yi) * cutoff * cutoff;
            for (ai, &a) in av.iter().enumerate() {
                for (bi, &b) in bv.iter().enumerate() {
                    tables[base + a * cutoff + b] = p.entry(xi, yi, ai, bi);
                }
            }
        }
    }
    Correlation::new(
        p.x.clone(),
        p.y.clone(),
        Answer::range(cutoff),
        Answer::range(cutoff),
        tables,
    )
}

/// Correlation of a many-questions strategy on the questions of `target_n`:
/// questions of blocks beyond the strategy are answered `⊥` with certainty.
pub fn lift_questions(strategy: &Strategy, family_n: usize, target_n: usize) -> Result<Correlation> {
    if target_n < family_n || !family_n.is_multiple_of(2) || !target_n.is_multiple_of(2) {
        return Err(Error::Validation(format!(
            "cannot lift questions from N={family_n} to N={target_n}"
        )));
    }
    let blocks = family_n / 2;
    let known = |q: &QuestionLabel| q.block_index().is_some_and(|m| m < blocks);
    if strategy.questions_a().len() != 3 * blocks
        || strategy.questions_b().len() != 5 * blocks
        || !strategy.questions_a().iter().chain(&strategy.questions_b()).all(known)
    {
        return Err(Error::Validation(
            "strategy does not carry the many-questions labels of N".into(),
        ));
    }
    let bottom_index = |set: &[Answer]| {
        set.iter()
            .position(|&a| a == Answer::Bottom)
            .ok_or_else(|| Error::Validation("answer set lacks ⊥".into()))
    };
    let (na, nb) = (strategy.answers_a().len(), strategy.answers_b().len());
    let (bot_a, bot_b) = (bottom_index(strategy.answers_a())?, bottom_index(strategy.answers_b())?);
    let id_a = CMatrix::identity(strategy.dim_a());
    let id_b = CMatrix::identity(strategy.dim_b());

    let mut x = Vec::new();
    let mut alice: Vec<OpList<'_>> = Vec::new();
    for m in 0..target_n / 2 {
        for tag in Tag::ALICE {
            let q = QuestionLabel::block(m, tag);
            x.push(q);
            alice.push(if m < blocks {
                strategy.alice_measurement(q)?.projectors().iter().map(Some).collect()
            } else {
                (0..na).map(|i| (i == bot_a).then_some(&id_a)).collect()
            });
        }
    }
    let mut y = Vec::new();
    let mut bob: Vec<OpList<'_>> = Vec::new();
    for m in 0..target_n / 2 {
        for tag in Tag::BOB {
            let q = QuestionLabel::block(m, tag);
            y.push(q);
            bob.push(if m < blocks {
                strategy.bob_measurement(q)?.projectors().iter().map(Some).collect()
            } else {
                (0..nb).map(|i| (i == bot_b).then_some(&id_b)).collect()
            });
        }
    }
    let tables = correlate(strategy.state(), &alice, &bob)?;
    Correlation::new(
        x,
        y,
        strategy.answers_a().to_vec(),
        strategy.answers_b().to_vec(),
        tables,
    )
}

/// Maps every answer outside `{0, …, n−1}` to answer 0, per side.
pub fn coarse_grain(p: &Correlation, n: usize) -> Result<Correlation> {
    let target = |set: &[Answer]| -> Result<Vec<usize>> {
        for v in 0..n {
            if !set.contains(&Answer::Value(v)) {
                return Err(Error::Validation(format!("answer set lacks {v}")));
            }
        }
        set.iter()
            .map(|a| match a {
                Answer::Value(v) if *v < n => Ok(*v),
                Answer::Value(_) => Ok(0),
                Answer::Bottom => Err(Error::Validation("cannot coarse-grain ⊥".into())),
            })
            .collect()
    };
    let ta = target(&p.a)?;
    let tb = target(&p.b)?;
    let mut tables = vec![0.0; p.x.len() * p.y.len() * n * n];
    for xi in 0..p.x.len() {
        for yi in 0..p.y.len() {
            let base = (xi * p.y.len() + yi) * n * n;
            for (ai, &a) in ta.iter().enumerate() {
                for (bi, &b) in tb.iter().enumerate() {
                    tables[base + a * n + b] += p.entry(xi, yi, ai, bi);
                }
            }
        }
    }
    Correlation::new(p.x.clone(), p.y.clone(), Answer::range(n), Answer::range(n), tables)
}

/// Local dimension of the truncated strategy at size `n`.
pub fn local_dim(family: Family, n: usize) -> usize {
    match family {
        Family::ManyAnswers => n,
        Family::ManyQuestions => n + 1,
    }
}

/// Bound on `|p̂_K − p_∞|_corr` for the truncation at `K ≥ 2`.
///
/// Both strategies split into components on which the state is a single
/// `|ii⟩` or a pair sharing a 2×2 block of both parties. Components on
/// indices `≤ K−2` coincide up to the normalization `1/(1−t)`, `t = Σ_{i≥K} c_i²`;
/// the rest carry at most the weight of indices `≥ K−2`.
pub fn tail_budget(k: usize) -> f64 {
    assert!(k >= 2, "truncation must keep at least two coefficients");
    let t = psi_infinity_tail(k);
    let edge = psi_infinity_weight(k - 2) + psi_infinity_weight(k - 1);
    let keep = 1.0 - t;
    t / keep + (t + edge) + edge / keep
}

/// Correlation of the truncation at `n`, lifted to the sets of cutoff `k`.
pub fn lifted_truncation(family: Family, n: usize, k: usize) -> Result<Correlation> {
    let s = truncated_separating_strategy(family, n)?;
    match family {
        Family::ManyAnswers => lift_answers(&evaluate(&s)?, k),
        Family::ManyQuestions => lift_questions(&s, n, k),
    }
}

/// Proxy for the separating limit: the truncation at `cutoff` with its
/// certified distance budget.
pub fn p_star_infinity(family: Family, cutoff: usize, max_dim: usize) -> Result<(Correlation, f64)> {
    if !family.accepts(cutoff) || cutoff < 2 {
        return Err(family.parity_error(cutoff));
    }
    let n = local_dim(family, cutoff);
    let joint = n.saturating_mul(n);
    if joint > max_dim {
        return Err(Error::Size {
            dim: joint,
            cap: max_dim,
        });
    }
    let p = evaluate(&truncated_separating_strategy(family, cutoff)?)?;
    Ok((p, tail_budget(cutoff)))
}

/// Smallest admissible cutoff whose budget is below `tol`.
pub fn p_star_for_tolerance(family: Family, tol: f64, max_dim: usize) -> Result<(Correlation, f64, usize)> {
    let mut k = match family {
        Family::ManyAnswers => 3,
        Family::ManyQuestions => 2,
    };
    while tail_budget(k) >= tol {
        k += 2;
        let n = local_dim(family, k);
        if n * n > max_dim {
            return Err(Error::Size {
                dim: n * n,
                cap: max_dim,
            });
        }
    }
    let (p, budget) = p_star_infinity(family, k, max_dim)?;
    Ok((p, budget, k))
}

/// Default cap used when callers do not pass one.
pub fn p_star_default(family: Family, cutoff: usize) -> Result<(Correlation, f64)> {
    p_star_infinity(family, cutoff, DEFAULT_MAX_DIM)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, CVector};
    use crate::states::make_state;
    use crate::strategy::{many_answers_ideal, many_questions_ideal, tilted_chsh_ideal};

    fn product_strategy() -> Strategy {
        let t = tilted_chsh_ideal(0.5).unwrap();
        let z = t.alice()[0].clone();
        let mut amps = CVector::zeros(4);
        amps[0] = c64(1.0, 0.0);
        let state = PureState::new(vec![2, 2], amps).unwrap();
        Strategy::new(state, vec![z.clone()], vec![z]).unwrap()
    }

    #[test]
    fn product_state_is_deterministic() {
        let p = evaluate(&product_strategy()).unwrap();
        assert_eq!(p.entry(0, 0, 0, 0), 1.0);
        assert_eq!(p.entry(0, 0, 1, 1), 0.0);
    }

    #[test]
    fn maximally_entangled_tilted_correlators() {
        let p = evaluate(&tilted_chsh_ideal(std::f64::consts::FRAC_PI_4).unwrap()).unwrap();
        for xi in 0..2 {
            for yi in 0..2 {
                let t = p.table(xi, yi);
                assert!((t[0] + t[1] - 0.5).abs() < 1e-14);
                assert!((t[0] + t[2] - 0.5).abs() < 1e-14);
            }
        }
        let t = p.table(0, 0);
        let corr = t[0] - t[1] - t[2] + t[3];
        assert!((corr - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn distance_of_disjoint_point_masses_is_two() {
        let p = evaluate(&product_strategy()).unwrap();
        let mut t = p.tables.clone();
        t.swap(0, 3);
        let q = Correlation::new(p.x.clone(), p.y.clone(), p.a.clone(), p.b.clone(), t).unwrap();
        assert_eq!(distance(&p, &q).unwrap().value, 2.0);
        assert_eq!(distance(&p, &p).unwrap().value, 0.0);
    }

    #[test]
    fn table_l1_matches_naive_sum() {
        let p: [f64; 3] = [0.1, 0.6, 0.3];
        let q = [0.2, 0.5, 0.3];
        let naive: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        assert!((table_l1(&p, &q) - naive).abs() < 1e-15);
    }

    #[test]
    fn reader_rejects_bad_sums() {
        let p = evaluate(&product_strategy()).unwrap();
        let text = p.to_json().unwrap();
        assert_eq!(Correlation::from_json(&text).unwrap(), p);
        let bad = text.replacen("1.0", "1.00000002", 1);
        assert!(Correlation::from_json(&bad).is_err());
        let csv = p.to_csv().unwrap();
        assert_eq!(Correlation::read_csv(csv.as_bytes()).unwrap(), p);
    }

    #[test]
    fn csv_quotes_block_labels() {
        let s = many_questions_ideal(&make_state(&[1.0, 2.0]).unwrap()).unwrap();
        let p = evaluate(&s).unwrap();
        let csv = p.to_csv().unwrap();
        assert!(csv.contains("\"(0,Z)\""));
        let back = Correlation::read_csv(csv.as_bytes()).unwrap();
        assert!(distance(&back, &p).unwrap().value < 1e-15);
    }

    #[test]
    fn lift_answers_round_trip() {
        let p = evaluate(&many_answers_ideal(&make_state(&[1.0, 2.0, 3.0]).unwrap()).unwrap()).unwrap();
        let lifted = lift_answers(&p, 7).unwrap();
        let back = lifted.restrict_answers(&Answer::range(3), &Answer::range(3)).unwrap();
        assert_eq!(back, p);
        assert!(lift_answers(&p, 2).is_err());
    }

    #[test]
    fn lift_questions_identity_and_bottom() {
        let s = truncated_separating_strategy(Family::ManyQuestions, 4).unwrap();
        let same = lift_questions(&s, 4, 4).unwrap();
        assert_eq!(same, evaluate(&s).unwrap());
        let up = lift_questions(&s, 4, 8).unwrap();
        let x = QuestionLabel::block(3, Tag::X);
        for y in up.questions_b().to_vec() {
            let total: f64 = [Answer::Value(0), Answer::Value(1), Answer::Bottom]
                .iter()
                .map(|&b| up.p(x, y, Answer::Bottom, b).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn coarse_grain_moves_mass_to_zero() {
        let p = evaluate(&many_answers_ideal(&make_state(&[1.0, 2.0, 3.0]).unwrap()).unwrap()).unwrap();
        let q = coarse_grain(&p, 2).unwrap();
        let x = QuestionLabel::Index(0);
        let y = QuestionLabel::Index(0);
        let p22 = p.p(x, y, Answer::Value(2), Answer::Value(2)).unwrap();
        let p00 = p.p(x, y, Answer::Value(0), Answer::Value(0)).unwrap();
        let q00 = q.p(x, y, Answer::Value(0), Answer::Value(0)).unwrap();
        assert!((q00 - p00 - p22).abs() < 1e-15);
        let same = coarse_grain(&p, 3).unwrap();
        assert_eq!(same, p);
    }

    #[test]
    fn tail_budget_is_monotone() {
        assert!(tail_budget(21) < tail_budget(11));
        assert!(tail_budget(4) < tail_budget(3));
    }

    #[test]
    fn p_star_respects_cap() {
        assert!(matches!(
            p_star_infinity(Family::ManyAnswers, 31, 100),
            Err(Error::Size { .. })
        ));
        assert!(matches!(
            p_star_for_tolerance(Family::ManyAnswers, 1e-300, 400),
            Err(Error::Size { .. })
        ));
    }
}
