use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::{Measurement, Strategy};
use crate::linalg::{c64, CMatrix, CVector, PureState, C64};

fn gaussian(rng: &mut impl Rng) -> C64 {
    c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Random Hermitian matrix with unit operator norm.
pub(crate) fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let h = g.hermitian_part();
    let (vals, _) = h.eigh();
    let norm = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    h.scale_real(1.0 / norm)
}

/// Random unit vector.
pub(crate) fn random_unit(n: usize, rng: &mut impl Rng) -> CVector {
    let v = CVector::from_fn(n, |_, _| gaussian(rng));
    let norm = v.norm();
    v.map(|z| z / norm)
}

/// `exp(i · eps · H)` for Hermitian `H`.
fn unitary_from(h: &CMatrix, eps: f64) -> CMatrix {
    h.hermitian_map(|x| C64::from_polar(1.0, eps * x))
}

fn conjugate(m: &Measurement, u: &CMatrix) -> Measurement {
    let ud = u.adjoint();
    m.map_projectors(|p| &(u * p) * &ud)
}

/// Conjugates every measurement by an independent random unitary
/// `exp(i·eps·H)` and mixes the state toward a random direction with
/// amplitude `eps`. The same seed always produces the same `H` and direction.
pub fn perturb(strategy: &Strategy, eps: f64, seed: u64) -> Strategy {
    assert!(eps >= 0.0 && eps.is_finite(), "eps must be a nonnegative real");
    if eps == 0.0 {
        return strategy.clone();
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let shift = |ms: &[Measurement], n: usize, rng: &mut ChaCha20Rng| -> Vec<Measurement> {
        ms.iter()
            .map(|m| conjugate(m, &unitary_from(&random_hermitian(n, rng), eps)))
            .collect()
    };
    let alice = shift(strategy.alice(), strategy.dim_a(), &mut rng);
    let bob = shift(strategy.bob(), strategy.dim_b(), &mut rng);
    let psi = strategy.state();
    let phi = random_unit(psi.dim(), &mut rng);
    let mixed = psi.amplitudes() + phi * c64(eps, 0.0);
    let state = PureState::normalized(psi.dims().to_vec(), mixed).expect("perturbed state is nonzero");
    Strategy::assemble(state, alice, bob).expect("perturbation keeps dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::make_state;
    use crate::strategy::many_answers_ideal;

    #[test]
    fn zero_eps_is_identity() {
        let s = many_answers_ideal(&make_state(&[1.0, 2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(perturb(&s, 0.0, 9), s);
    }

    #[test]
    fn perturbed_measurements_stay_projective() {
        let s = many_answers_ideal(&make_state(&[1.0, 2.0, 3.0]).unwrap()).unwrap();
        let p = perturb(&s, 0.05, 3);
        for m in p.alice().iter().chain(p.bob()) {
            assert!(m.defect().unwrap() < 1e-12);
        }
        assert_ne!(p, s);
        assert_eq!(perturb(&s, 0.05, 3), p);
    }

    #[test]
    fn random_hermitian_has_unit_norm() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let h = random_hermitian(5, &mut rng);
        assert!(h.is_hermitian(1e-14));
        assert!((h.op_norm() - 1.0).abs() < 1e-12);
    }
}
