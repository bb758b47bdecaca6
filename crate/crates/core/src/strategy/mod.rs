//! Strategies: a shared pure state and per-question projective measurements.

pub(crate) mod codec;
mod ideal;
mod noise;
mod povm;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, PureState, STRUCT_TOL};

pub use codec::{ComplexMatrixRepr, ComplexVectorRepr};
pub(crate) use ideal::tilted_chsh_any;
pub use ideal::{many_answers_ideal, many_questions_ideal, tilted_chsh_ideal, truncated_separating_strategy};
pub use noise::perturb;
pub use povm::{povm_reduce, Povm, PovmStrategy};

/// The two constructions with unbounded Schmidt rank in the limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Odd local dimension, three questions for Alice and four for Bob, d answers.
    ManyAnswers,
    /// Even local dimension, block-indexed questions, at most four answers.
    ManyQuestions,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::ManyAnswers => "many-answers",
            Family::ManyQuestions => "many-questions",
        }
    }

    /// Whether `d` has the parity this family is defined for.
    pub fn accepts(self, d: usize) -> bool {
        match self {
            Family::ManyAnswers => d % 2 == 1,
            Family::ManyQuestions => d.is_multiple_of(2) && d >= 2,
        }
    }

    pub(crate) fn parity_error(self, d: usize) -> Error {
        Error::Parity {
            family: self.name(),
            expected: match self {
                Family::ManyAnswers => "odd",
                Family::ManyQuestions => "even",
            },
            d,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "many-answers" => Ok(Family::ManyAnswers),
            "many-questions" => Ok(Family::ManyQuestions),
            other => Err(Error::Parse(format!("unknown family {other:?}"))),
        }
    }
}

/// Question tag of the many-questions family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Z,
    X,
    XPrime,
    ZPrime,
    Aux,
}

impl Tag {
    fn as_str(self) -> &'static str {
        match self {
            Tag::Z => "Z",
            Tag::X => "X",
            Tag::XPrime => "X'",
            Tag::ZPrime => "Z'",
            Tag::Aux => "Aux",
        }
    }

    pub const ALICE: [Tag; 3] = [Tag::Z, Tag::X, Tag::XPrime];
    pub const BOB: [Tag; 5] = [Tag::Z, Tag::X, Tag::ZPrime, Tag::XPrime, Tag::Aux];
}

/// Integer question, or block-indexed `(m, tag)` question.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuestionLabel {
    Index(usize),
    Block { m: usize, tag: Tag },
}

impl QuestionLabel {
    pub fn block(m: usize, tag: Tag) -> Self {
        QuestionLabel::Block { m, tag }
    }

    pub fn block_index(&self) -> Option<usize> {
        match self {
            QuestionLabel::Block { m, .. } => Some(*m),
            QuestionLabel::Index(_) => None,
        }
    }
}

impl fmt::Display for QuestionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuestionLabel::Index(i) => write!(f, "{i}"),
            QuestionLabel::Block { m, tag } => write!(f, "({m},{})", tag.as_str()),
        }
    }
}

impl FromStr for QuestionLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            let (m, tag) = inner
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad question label {s:?}")))?;
            let m = m
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad block index in {s:?}")))?;
            let tag = match tag.trim() {
                "Z" => Tag::Z,
                "X" => Tag::X,
                "X'" => Tag::XPrime,
                "Z'" => Tag::ZPrime,
                "Aux" => Tag::Aux,
                other => return Err(Error::Parse(format!("unknown tag {other:?}"))),
            };
            return Ok(QuestionLabel::Block { m, tag });
        }
        s.parse()
            .map(QuestionLabel::Index)
            .map_err(|_| Error::Parse(format!("bad question label {s:?}")))
    }
}

impl Serialize for QuestionLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QuestionLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Answer label: a natural number or the catch-all `⊥`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Answer {
    Value(usize),
    Bottom,
}

impl Answer {
    pub fn value(&self) -> Option<usize> {
        match self {
            Answer::Value(v) => Some(*v),
            Answer::Bottom => None,
        }
    }

    pub fn range(n: usize) -> Vec<Answer> {
        (0..n).map(Answer::Value).collect()
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Value(v) => write!(f, "{v}"),
            Answer::Bottom => f.write_str("⊥"),
        }
    }
}

impl FromStr for Answer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "⊥" | "bot" => Ok(Answer::Bottom),
            v => v
                .parse()
                .map(Answer::Value)
                .map_err(|_| Error::Parse(format!("bad answer label {s:?}"))),
        }
    }
}

impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Answer::Value(v) => s.serialize_u64(*v as u64),
            Answer::Bottom => s.serialize_str("⊥"),
        }
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Answer::Value(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Projective measurement with labeled outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    question: QuestionLabel,
    outcomes: Vec<Answer>,
    projectors: Vec<CMatrix>,
}

impl Measurement {
    /// Validates projectivity, orthogonality and completeness at 1e-10.
    pub fn new(question: QuestionLabel, outcomes: Vec<Answer>, projectors: Vec<CMatrix>) -> Result<Self> {
        let m = Measurement {
            question,
            outcomes,
            projectors,
        };
        m.check(STRUCT_TOL)?;
        Ok(m)
    }

    pub(crate) fn unchecked(question: QuestionLabel, outcomes: Vec<Answer>, projectors: Vec<CMatrix>) -> Self {
        Measurement {
            question,
            outcomes,
            projectors,
        }
    }

    /// Largest violation of the measurement invariants.
    pub fn defect(&self) -> Result<f64> {
        let n = self.dim();
        if self.projectors.is_empty() || self.projectors.len() != self.outcomes.len() {
            return Err(Error::Validation(format!(
                "measurement {} has {} outcomes and {} projectors",
                self.question,
                self.outcomes.len(),
                self.projectors.len()
            )));
        }
        let distinct: BTreeSet<_> = self.outcomes.iter().collect();
        if distinct.len() != self.outcomes.len() {
            return Err(Error::Validation(format!(
                "duplicate outcome labels in {}",
                self.question
            )));
        }
        if self.projectors.iter().any(|p| p.rows() != n || p.cols() != n) {
            return Err(Error::Dimension(format!(
                "projector shapes differ in {}",
                self.question
            )));
        }
        let mut worst = 0.0f64;
        for (i, p) in self.projectors.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::Validation("non-finite projector entry".into()));
            }
            worst = worst.max(p.hermitian_deviation());
            worst = worst.max((&(p * p) - p).norm_fro());
            for q in &self.projectors[i + 1..] {
                worst = worst.max((p * q).op_norm());
            }
        }
        let total = CMatrix::sum(n, &self.projectors);
        worst = worst.max((&total - &CMatrix::identity(n)).norm_fro());
        Ok(worst)
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let defect = self.defect()?;
        if defect > tol {
            return Err(Error::Validation(format!(
                "measurement {} violates projective invariants by {defect:.3e}",
                self.question
            )));
        }
        Ok(())
    }

    pub fn question(&self) -> QuestionLabel {
        self.question
    }

    pub fn outcomes(&self) -> &[Answer] {
        &self.outcomes
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    pub fn dim(&self) -> usize {
        self.projectors.first().map_or(0, CMatrix::rows)
    }

    /// Projector of the given outcome label.
    pub fn projector(&self, outcome: Answer) -> Option<&CMatrix> {
        self.outcomes
            .iter()
            .position(|&o| o == outcome)
            .map(|i| &self.projectors[i])
    }

    /// `Π_plus − Π_minus`.
    pub fn observable(&self, plus: Answer, minus: Answer) -> Result<CMatrix> {
        Ok(self.require(plus)? - self.require(minus)?)
    }

    /// `Π_plus + Π_minus`.
    pub fn support(&self, plus: Answer, minus: Answer) -> Result<CMatrix> {
        Ok(self.require(plus)? + self.require(minus)?)
    }

    pub(crate) fn require(&self, outcome: Answer) -> Result<&CMatrix> {
        self.projector(outcome)
            .ok_or_else(|| Error::Validation(format!("question {} has no outcome {outcome}", self.question)))
    }

    pub(crate) fn map_projectors(&self, f: impl Fn(&CMatrix) -> CMatrix) -> Measurement {
        Measurement {
            question: self.question,
            outcomes: self.outcomes.clone(),
            projectors: self.projectors.iter().map(f).collect(),
        }
    }
}

/// Joint state on `H_A ⊗ H_B` with measurements for both parties.
#[derive(Clone, Debug, PartialEq)]
pub struct Strategy {
    state: PureState,
    alice: Vec<Measurement>,
    bob: Vec<Measurement>,
}

impl Strategy {
    pub fn new(state: PureState, alice: Vec<Measurement>, bob: Vec<Measurement>) -> Result<Self> {
        for m in alice.iter().chain(&bob) {
            m.check(STRUCT_TOL)?;
        }
        Self::assemble(state, alice, bob)
    }

    pub(crate) fn assemble(state: PureState, alice: Vec<Measurement>, bob: Vec<Measurement>) -> Result<Self> {
        if state.dims().len() != 2 {
            return Err(Error::Dimension("strategy state must be bipartite".into()));
        }
        let (da, db) = (state.dims()[0], state.dims()[1]);
        check_party("Alice", &alice, da)?;
        check_party("Bob", &bob, db)?;
        Ok(Strategy { state, alice, bob })
    }

    pub fn state(&self) -> &PureState {
        &self.state
    }

    pub fn alice(&self) -> &[Measurement] {
        &self.alice
    }

    pub fn bob(&self) -> &[Measurement] {
        &self.bob
    }

    pub fn dim_a(&self) -> usize {
        self.state.dims()[0]
    }

    pub fn dim_b(&self) -> usize {
        self.state.dims()[1]
    }

    pub fn questions_a(&self) -> Vec<QuestionLabel> {
        self.alice.iter().map(Measurement::question).collect()
    }

    pub fn questions_b(&self) -> Vec<QuestionLabel> {
        self.bob.iter().map(Measurement::question).collect()
    }

    pub fn answers_a(&self) -> &[Answer] {
        self.alice[0].outcomes()
    }

    pub fn answers_b(&self) -> &[Answer] {
        self.bob[0].outcomes()
    }

    pub fn alice_measurement(&self, q: QuestionLabel) -> Result<&Measurement> {
        find(&self.alice, q)
    }

    pub fn bob_measurement(&self, q: QuestionLabel) -> Result<&Measurement> {
        find(&self.bob, q)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&codec::StrategyDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: codec::StrategyDoc = serde_json::from_str(text)?;
        doc.into_strategy()
    }
}

fn find(ms: &[Measurement], q: QuestionLabel) -> Result<&Measurement> {
    ms.iter()
        .find(|m| m.question() == q)
        .ok_or_else(|| Error::Validation(format!("no measurement for question {q}")))
}

fn check_party(name: &str, ms: &[Measurement], dim: usize) -> Result<()> {
    let first = ms
        .first()
        .ok_or_else(|| Error::Validation(format!("{name} has no measurements")))?;
    let mut seen = BTreeSet::new();
    for m in ms {
        if m.dim() != dim {
            return Err(Error::Dimension(format!(
                "{name}'s measurement {} acts on dimension {} but the local space has {dim}",
                m.question(),
                m.dim()
            )));
        }
        if m.outcomes() != first.outcomes() {
            return Err(Error::Validation(format!(
                "{name}'s measurements use different answer sets"
            )));
        }
        if !seen.insert(m.question()) {
            return Err(Error::Validation(format!("duplicate question {}", m.question())));
        }
    }
    Ok(())
}
