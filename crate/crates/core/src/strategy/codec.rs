use serde::{Deserialize, Serialize};

use super::{Answer, Measurement, QuestionLabel, Strategy};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, CVector, PureState};

/// Complex vector as `[re, im]` pairs.
pub type ComplexVectorRepr = Vec<[f64; 2]>;

/// Complex matrix as rows of `[re, im]` pairs.
pub type ComplexMatrixRepr = Vec<Vec<[f64; 2]>>;

pub fn encode_matrix(m: &CMatrix) -> ComplexMatrixRepr {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| {
                    let z = m.get(i, j);
                    [z.re, z.im]
                })
                .collect()
        })
        .collect()
}

pub fn decode_matrix(rows: &ComplexMatrixRepr) -> Result<CMatrix> {
    let rows: Vec<Vec<_>> = rows
        .iter()
        .map(|r| r.iter().map(|&[re, im]| c64(re, im)).collect())
        .collect();
    CMatrix::from_rows(&rows)
}

pub fn encode_vector(v: &CVector) -> ComplexVectorRepr {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn decode_vector(v: &ComplexVectorRepr) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|&[re, im]| c64(re, im)))
}

#[derive(Serialize, Deserialize)]
pub(crate) struct StateDoc {
    pub dims: Vec<usize>,
    pub amplitudes: ComplexVectorRepr,
}

impl StateDoc {
    pub fn from_state(s: &PureState) -> Self {
        StateDoc {
            dims: s.dims().to_vec(),
            amplitudes: encode_vector(s.amplitudes()),
        }
    }

    pub fn into_state(self) -> Result<PureState> {
        PureState::new(self.dims, decode_vector(&self.amplitudes))
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct MeasurementDoc {
    pub question: QuestionLabel,
    pub outcomes: Vec<Answer>,
    pub projectors: Vec<ComplexMatrixRepr>,
}

impl From<&Measurement> for MeasurementDoc {
    fn from(m: &Measurement) -> Self {
        MeasurementDoc {
            question: m.question(),
            outcomes: m.outcomes().to_vec(),
            projectors: m.projectors().iter().map(encode_matrix).collect(),
        }
    }
}

impl MeasurementDoc {
    fn into_measurement(self) -> Result<Measurement> {
        let projectors = self.projectors.iter().map(decode_matrix).collect::<Result<Vec<_>>>()?;
        Measurement::new(self.question, self.outcomes, projectors)
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct StrategyDoc {
    pub state: StateDoc,
    pub alice: Vec<MeasurementDoc>,
    pub bob: Vec<MeasurementDoc>,
}

impl From<&Strategy> for StrategyDoc {
    fn from(s: &Strategy) -> Self {
        StrategyDoc {
            state: StateDoc::from_state(s.state()),
            alice: s.alice().iter().map(MeasurementDoc::from).collect(),
            bob: s.bob().iter().map(MeasurementDoc::from).collect(),
        }
    }
}

impl StrategyDoc {
    pub fn into_strategy(self) -> Result<Strategy> {
        let state = self.state.into_state()?;
        let alice = collect(self.alice)?;
        let bob = collect(self.bob)?;
        Strategy::new(state, alice, bob)
    }
}

fn collect(docs: Vec<MeasurementDoc>) -> Result<Vec<Measurement>> {
    if docs.is_empty() {
        return Err(Error::Validation("empty measurement list".into()));
    }
    docs.into_iter().map(MeasurementDoc::into_measurement).collect()
}
