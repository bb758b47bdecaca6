use super::{Answer, Measurement, QuestionLabel, Strategy};
use crate::error::{Error, Result};
use crate::linalg::{schmidt, CMatrix, PureState, STRUCT_TOL};

/// Positive operator-valued measurement with labeled outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    question: QuestionLabel,
    outcomes: Vec<Answer>,
    effects: Vec<CMatrix>,
}

impl Povm {
    pub fn question(&self) -> QuestionLabel {
        self.question
    }

    pub fn outcomes(&self) -> &[Answer] {
        &self.outcomes
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    /// Largest deviation from positivity, Hermiticity and completeness.
    pub fn defect(&self) -> f64 {
        let n = self.effects.first().map_or(0, CMatrix::rows);
        let mut worst = 0.0f64;
        for e in &self.effects {
            worst = worst.max(e.hermitian_deviation());
            let (vals, _) = e.eigh();
            if let Some(&min) = vals.first() {
                worst = worst.max(-min);
            }
        }
        let total = CMatrix::sum(n, &self.effects);
        worst.max((&total - &CMatrix::identity(n)).norm_fro())
    }
}

/// Strategy with general POVMs on the reduced local spaces.
#[derive(Clone, Debug)]
pub struct PovmStrategy {
    pub state: PureState,
    pub alice: Vec<Povm>,
    pub bob: Vec<Povm>,
}

impl PovmStrategy {
    pub fn rank(&self) -> usize {
        self.state.dims()[0]
    }
}

fn compress(m: &Measurement, v: &CMatrix) -> Povm {
    let vd = v.adjoint();
    Povm {
        question: m.question(),
        outcomes: m.outcomes().to_vec(),
        effects: m.projectors().iter().map(|p| &(&vd * p) * v).collect(),
    }
}

/// Restricts the strategy to the support of the state's Schmidt decomposition.
///
/// With `ψ = Σ λ_i u_i ⊗ v_i` of rank `r`, the isometries `V_A = [u_i]`,
/// `V_B = [v_i]` give effects `V_A† A V_A`, `V_B† B V_B` on `C^r` and the
/// state `Σ λ_i |ii⟩`.
pub fn povm_reduce(strategy: &Strategy) -> Result<PovmStrategy> {
    let spectrum = schmidt(strategy.state(), 1)?;
    let r = spectrum.rank();
    if r == 0 {
        return Err(Error::Validation("state has no Schmidt support".into()));
    }
    let va = spectrum.left().columns(0, r);
    let vb = spectrum.right().columns(0, r);
    let lambda = &spectrum.coefficients()[..r];
    let norm = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
    let kept: Vec<f64> = lambda.iter().map(|x| x / norm).collect();
    let state = PureState::from_schmidt(&kept, r, r)?;
    let out = PovmStrategy {
        state,
        alice: strategy.alice().iter().map(|m| compress(m, &va)).collect(),
        bob: strategy.bob().iter().map(|m| compress(m, &vb)).collect(),
    };
    let worst = out
        .alice
        .iter()
        .chain(&out.bob)
        .map(Povm::defect)
        .fold(0.0f64, f64::max);
    if worst > STRUCT_TOL {
        return Err(Error::Validation(format!("reduced POVMs deviate by {worst:.3e}")));
    }
    Ok(out)
}
