//! Schmidt-coefficient states and the block angles derived from them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::PureState;

/// Schmidt coefficients `c_i > 0` of `Σ c_i |ii⟩`, in index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchmidt", into = "RawSchmidt")]
pub struct SchmidtState {
    c: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSchmidt {
    c: Vec<f64>,
}

impl TryFrom<RawSchmidt> for SchmidtState {
    type Error = Error;
    fn try_from(raw: RawSchmidt) -> Result<Self> {
        SchmidtState::new(raw.c)
    }
}

impl From<SchmidtState> for RawSchmidt {
    fn from(s: SchmidtState) -> Self {
        RawSchmidt { c: s.c }
    }
}

impl SchmidtState {
    /// Accepts already-normalized coefficients.
    pub fn new(c: Vec<f64>) -> Result<Self> {
        check_positive(&c)?;
        let total: f64 = c.iter().map(|x| x * x).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "squared coefficients sum to {total}, expected 1"
            )));
        }
        Ok(SchmidtState { c })
    }

    pub fn d(&self) -> usize {
        self.c.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn coefficient(&self, i: usize) -> f64 {
        self.c[i]
    }

    /// `Σ c_i |ii⟩` on local dimension `local` (≥ d), zero padded.
    pub fn pure_state(&self, local: usize) -> Result<PureState> {
        PureState::from_schmidt(&self.c, local, local)
    }

    /// Number of unprimed blocks `(2m, 2m+1)` that fit.
    pub fn block_count(&self) -> usize {
        self.d() / 2
    }
}

fn check_positive(c: &[f64]) -> Result<()> {
    if c.is_empty() {
        return Err(Error::Validation("empty coefficient list".into()));
    }
    if let Some((i, x)) = c.iter().enumerate().find(|(_, x)| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::Validation(format!(
            "coefficient {i} = {x} is not a positive finite number"
        )));
    }
    Ok(())
}

/// Normalizes a list of positive reals, preserving order.
pub fn make_state(c_raw: &[f64]) -> Result<SchmidtState> {
    check_positive(c_raw)?;
    let norm = c_raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(SchmidtState {
        c: c_raw.iter().map(|x| x / norm).collect(),
    })
}

/// `Ψ_N ∝ Σ_{i<N} (i+1)^{-8} |ii⟩`.
pub fn psi_n(n: usize) -> Result<SchmidtState> {
    if n == 0 {
        return Err(Error::Validation("N must be at least 1".into()));
    }
    let raw: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).powi(-8)).collect();
    make_state(&raw)
}

/// Generalized harmonic number `Σ_{n=1}^N n^{-r}`.
pub fn harmonic(n: usize, r: u32) -> f64 {
    (1..=n).rev().map(|k| (k as f64).powi(-(r as i32))).sum()
}

/// `ζ(16) = 3617 π¹⁶ / 325641566250`.
pub fn zeta16() -> f64 {
    3617.0 * PI.powi(16) / 325_641_566_250.0
}

/// Upper bound on `Σ_{n>k} n^{-16}`: explicit sum plus an integral remainder.
pub fn zeta16_tail(k: usize) -> f64 {
    const TERMS: usize = 4096;
    let last = k + TERMS;
    let explicit: f64 = (k + 1..=last).rev().map(|n| (n as f64).powi(-16)).sum();
    explicit + (last as f64).powi(-15) / 15.0
}

/// Squared coefficient `c_i²` of the normalized infinite state `Ψ_∞`.
pub fn psi_infinity_weight(i: usize) -> f64 {
    ((i + 1) as f64).powi(-16) / zeta16()
}

/// Upper bound on `Σ_{i≥k} c_i²` for `Ψ_∞`.
pub fn psi_infinity_tail(k: usize) -> f64 {
    zeta16_tail(k) / zeta16()
}

/// Angles and tilt of one 2×2 block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    pub m: usize,
    pub theta: f64,
    pub mu: f64,
    pub alpha: f64,
}

impl BlockParams {
    pub fn from_theta(m: usize, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < PI / 2.0) {
            return Err(Error::Validation(format!("theta {theta} outside (0, pi/2)")));
        }
        Ok(Self::from_theta_unchecked(m, theta))
    }

    pub(crate) fn from_theta_unchecked(m: usize, theta: f64) -> Self {
        let (s, c) = (2.0 * theta).sin_cos();
        BlockParams {
            m,
            theta,
            mu: s.atan(),
            alpha: 2.0 * c.abs() / (c * c + 2.0 * s * s).sqrt(),
        }
    }

    /// Tilt oriented so that the ideal block attains `√(8+2α²)`:
    /// `α` when `c_lo ≥ c_hi`, `−α` otherwise.
    pub fn signed_alpha(&self) -> f64 {
        if (2.0 * self.theta).cos() >= 0.0 {
            self.alpha
        } else {
            -self.alpha
        }
    }

    /// Maximal quantum value `√(8+2α²)`.
    pub fn quantum_max(&self) -> f64 {
        (8.0 + 2.0 * self.alpha * self.alpha).sqrt()
    }

    /// Classical bound `2+α`.
    pub fn classical_max(&self) -> f64 {
        2.0 + self.alpha
    }
}

/// Indices `(lo, hi)` of block `m`: `(2m, 2m+1)`, or `(2m+1, 2m+2)` when primed.
pub fn block_indices(m: usize, primed: bool) -> (usize, usize) {
    if primed {
        (2 * m + 1, 2 * m + 2)
    } else {
        (2 * m, 2 * m + 1)
    }
}

/// `θ_m = arctan(c_{2m+1}/c_{2m})`, primed `θ′_m = arctan(c_{2m+2}/c_{2m+1})`.
pub fn block_params(state: &SchmidtState, m: usize, primed: bool) -> Result<BlockParams> {
    let (lo, hi) = block_indices(m, primed);
    if hi >= state.d() {
        return Err(Error::BlockRange { m, d: state.d() });
    }
    let theta = state.c[hi].atan2(state.c[lo]);
    BlockParams::from_theta(m, theta)
}

/// `c_lo² + c_hi²` for block `m`.
pub fn block_mass(state: &SchmidtState, m: usize, primed: bool) -> Result<f64> {
    let (lo, hi) = block_indices(m, primed);
    if hi >= state.d() {
        return Err(Error::BlockRange { m, d: state.d() });
    }
    Ok(state.c[lo] * state.c[lo] + state.c[hi] * state.c[hi])
}

/// Truncation size with its distance bound `α N^{-16}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceParams {
    pub n: usize,
    pub epsilon_n: f64,
}

impl ConvergenceParams {
    pub fn new(n: usize, alpha_const: f64) -> Self {
        ConvergenceParams {
            n,
            epsilon_n: alpha_const * (n as f64).powi(-16),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn make_state_examples() {
        let s = make_state(&[1.0, 1.0]).unwrap();
        assert!((s.c()[0] - 0.5f64.sqrt()).abs() < 1e-15);
        let s = make_state(&[3.0, 4.0]).unwrap();
        assert!((s.c()[0] - 0.6).abs() < 1e-15);
        assert!((s.c()[1] - 0.8).abs() < 1e-15);
        assert!(make_state(&[1.0, 0.0]).is_err());
        assert!(make_state(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn order_is_preserved() {
        let s = make_state(&[1.0, 5.0, 2.0]).unwrap();
        assert!(s.c()[1] > s.c()[2] && s.c()[2] > s.c()[0]);
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi_n(1).unwrap().c(), &[1.0]);
        let s = psi_n(3).unwrap();
        let raw = [1.0, 1.0 / 256.0, 1.0 / 6561.0];
        let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (c, r) in s.c().iter().zip(raw) {
            assert!((c - r / n).abs() < 1e-16);
        }
        let s = psi_n(21).unwrap();
        let total: f64 = s.c().iter().map(|x| x * x).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn harmonic_examples() {
        assert_eq!(harmonic(1, 16), 1.0);
        assert_eq!(harmonic(2, 2), 1.25);
        let direct = 1.0 + 2f64.powi(-16) + 3f64.powi(-16);
        assert!((harmonic(3, 16) - direct).abs() < 1e-16);
    }

    #[test]
    fn zeta_tail_is_consistent() {
        let partial = harmonic(200, 16);
        assert!((partial + zeta16_tail(200) - zeta16()).abs() < 1e-15);
        assert!(zeta16_tail(3) >= 4f64.powi(-16));
    }

    #[test]
    fn maximally_entangled_block() {
        let s = make_state(&[1.0, 1.0]).unwrap();
        let b = block_params(&s, 0, false).unwrap();
        assert!((b.theta - FRAC_PI_4).abs() < 1e-15);
        assert!((b.mu - FRAC_PI_4).abs() < 1e-15);
        assert!(b.alpha.abs() < 1e-15);
    }

    #[test]
    fn three_four_five_block() {
        let s = make_state(&[3.0, 4.0]).unwrap();
        let b = block_params(&s, 0, false).unwrap();
        assert!((b.theta - (4.0f64 / 3.0).atan()).abs() < 1e-15);
        assert!((b.theta - 0.9273).abs() < 1e-4);
        assert!(b.signed_alpha() < 0.0);
    }

    #[test]
    fn block_range_errors() {
        let s = make_state(&[1.0, 2.0, 3.0]).unwrap();
        assert!(block_params(&s, 0, true).is_ok());
        assert!(matches!(
            block_params(&s, 1, false),
            Err(Error::BlockRange { m: 1, d: 3 })
        ));
        assert!(block_params(&s, 1, true).is_err());
    }

    #[test]
    fn boundary_theta_rejected() {
        assert!(BlockParams::from_theta(0, 0.0).is_err());
        assert!(BlockParams::from_theta(0, PI / 2.0).is_err());
    }

    #[test]
    fn json_round_trip_validates() {
        let s = psi_n(5).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: SchmidtState = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<SchmidtState>(r#"{"c":[1.0,1.0]}"#).is_err());
    }
}
