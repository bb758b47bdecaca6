//! Extraction operators, Yang–Navascués residuals and the swap isometry.

use std::f64::consts::PI;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, PureState, C64, DEFAULT_MAX_DIM};
use crate::states::{block_params, SchmidtState};
use crate::strategy::codec::{decode_matrix, encode_matrix};
use crate::strategy::{Answer, ComplexMatrixRepr, Family, Measurement, QuestionLabel, Strategy, Tag};

/// Tolerance for support and unitarity checks on measured observables.
pub const SUPPORT_TOL: f64 = 1e-8;
/// Eigenvalues below this magnitude count as zero in [`polar_fix`].
pub const ZERO_EIGENVALUE: f64 = 1e-12;

/// Projections, chain unitaries and clock operators feeding the swap isometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionKit {
    pub d: usize,
    pub p_a: Vec<CMatrix>,
    pub p_b: Vec<CMatrix>,
    /// `X_A^{(k)}`, with `k = 0` the identity.
    pub chain_x_a: Vec<CMatrix>,
    pub chain_x_b: Vec<CMatrix>,
    pub z_a: CMatrix,
    pub z_b: CMatrix,
    pub omega: C64,
}

#[derive(Serialize, Deserialize)]
struct KitDoc {
    d: usize,
    p_a: Vec<ComplexMatrixRepr>,
    p_b: Vec<ComplexMatrixRepr>,
    chain_x_a: Vec<ComplexMatrixRepr>,
    chain_x_b: Vec<ComplexMatrixRepr>,
    z_a: ComplexMatrixRepr,
    z_b: ComplexMatrixRepr,
    omega: [f64; 2],
}

impl Serialize for ExtractionKit {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let enc = |v: &[CMatrix]| v.iter().map(encode_matrix).collect();
        KitDoc {
            d: self.d,
            p_a: enc(&self.p_a),
            p_b: enc(&self.p_b),
            chain_x_a: enc(&self.chain_x_a),
            chain_x_b: enc(&self.chain_x_b),
            z_a: encode_matrix(&self.z_a),
            z_b: encode_matrix(&self.z_b),
            omega: [self.omega.re, self.omega.im],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExtractionKit {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = KitDoc::deserialize(de)?;
        let dec = |v: &[ComplexMatrixRepr]| -> Result<Vec<CMatrix>> { v.iter().map(decode_matrix).collect() };
        let build = || -> Result<ExtractionKit> {
            Ok(ExtractionKit {
                d: doc.d,
                p_a: dec(&doc.p_a)?,
                p_b: dec(&doc.p_b)?,
                chain_x_a: dec(&doc.chain_x_a)?,
                chain_x_b: dec(&doc.chain_x_b)?,
                z_a: decode_matrix(&doc.z_a)?,
                z_b: decode_matrix(&doc.z_b)?,
                omega: c64(doc.omega[0], doc.omega[1]),
            })
        };
        let kit = build().map_err(D::Error::custom)?;
        kit.check_shape().map_err(D::Error::custom)?;
        Ok(kit)
    }
}

impl ExtractionKit {
    fn check_shape(&self) -> Result<()> {
        let lists = [&self.p_a, &self.p_b, &self.chain_x_a, &self.chain_x_b];
        if lists.iter().any(|l| l.len() != self.d) {
            return Err(Error::Dimension(format!("kit lists must have length {}", self.d)));
        }
        let na = self.z_a.rows();
        let nb = self.z_b.rows();
        let ok_a = self
            .p_a
            .iter()
            .chain(&self.chain_x_a)
            .all(|m| m.rows() == na && m.cols() == na);
        let ok_b = self
            .p_b
            .iter()
            .chain(&self.chain_x_b)
            .all(|m| m.rows() == nb && m.cols() == nb);
        if !ok_a || !ok_b {
            return Err(Error::Dimension("kit operators have inconsistent sizes".into()));
        }
        Ok(())
    }

    /// Largest deviation of the projections and chain unitaries from their
    /// defining identities.
    pub fn defect(&self) -> f64 {
        let proj = |p: &CMatrix| p.hermitian_deviation().max((&(p * p) - p).norm_fro());
        let unit = |u: &CMatrix| (&(&u.adjoint() * u) - &CMatrix::identity(u.rows())).norm_fro();
        let p = self.p_a.iter().chain(&self.p_b).map(proj);
        let u = self
            .chain_x_a
            .iter()
            .chain(&self.chain_x_b)
            .chain([&self.z_a, &self.z_b])
            .map(unit);
        p.chain(u).fold(0.0, f64::max)
    }
}

/// Residuals of the four Yang–Navascués conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps4: f64,
    pub overall: f64,
}

impl ResidualReport {
    pub fn as_array(&self) -> [f64; 4] {
        [self.eps1, self.eps2, self.eps3, self.eps4]
    }
}

/// `1 − S + op`, where `op` must live on the support projector `S` and be
/// unitary there.
pub fn unitarize(op: &CMatrix, support: &CMatrix) -> Result<CMatrix> {
    let n = op.rows();
    if support.rows() != n || !op.is_square() || !support.is_square() {
        return Err(Error::Dimension("operator and support differ in size".into()));
    }
    let off = (&(support * &(op * support)) - op).norm_fro();
    let unit = (&(&op.adjoint() * op) - support).norm_fro();
    let idem = (&(support * support) - support).norm_fro();
    let worst = off.max(unit).max(idem);
    if !(worst <= SUPPORT_TOL) {
        return Err(Error::Support(worst));
    }
    Ok(&(&CMatrix::identity(n) - support) + op)
}

/// Sign function of a Hermitian operator with zero eigenvalues sent to `+1`.
pub fn polar_fix(op: &CMatrix) -> Result<CMatrix> {
    let dev = op.hermitian_deviation();
    if !(dev <= 1e-10) {
        return Err(Error::NotHermitian(dev));
    }
    Ok(op.hermitian_map(|x| {
        if x.abs() < ZERO_EIGENVALUE || x > 0.0 {
            c64(1.0, 0.0)
        } else {
            c64(-1.0, 0.0)
        }
    }))
}

struct BobBlock {
    x: CMatrix,
    plus: CMatrix,
    minus: CMatrix,
}

/// Block operators on Bob's side from the two tilted measurements
/// `B_Z = cos μ Z + sin μ X` and `B_X = cos μ Z − sin μ X`.
fn bob_block(bz: &Measurement, bx: &Measurement, lo: Answer, hi: Answer, mu: f64) -> Result<BobBlock> {
    let sz = bz.support(lo, hi)?;
    let sx = bx.support(lo, hi)?;
    let uz = unitarize(&bz.observable(lo, hi)?, &sz)?;
    let ux = unitarize(&bx.observable(lo, hi)?, &sx)?;
    let z = polar_fix(&(&uz + &ux).scale_real(0.5 / mu.cos()))?;
    let x = polar_fix(&(&uz - &ux).scale_real(0.5 / mu.sin()))?;
    let one = (&sz + &sx).scale_real(0.5).spectral_projector(|v| v > 0.5);
    let inner = &(&one * &z) * &one;
    Ok(BobBlock {
        plus: inner.spectral_projector(|v| v > 0.5),
        minus: inner.spectral_projector(|v| v < -0.5),
        x,
    })
}

fn alice_flip(m: &Measurement, lo: Answer, hi: Answer) -> Result<CMatrix> {
    unitarize(&m.observable(lo, hi)?, &m.support(lo, hi)?)
}

fn product_chain(flips: &[CMatrix], n: usize) -> Vec<CMatrix> {
    let mut out = vec![CMatrix::identity(n)];
    for f in flips {
        let next = out.last().expect("nonempty") * f;
        out.push(next);
    }
    out
}

/// Assembles the kit: level projections from Alice's computational basis and
/// Bob's block operators, chain unitaries as alternating products of the
/// block flips.
pub fn build_kit(strategy: &Strategy, family: Family, state: &SchmidtState) -> Result<ExtractionKit> {
    let d = state.d();
    if !family.accepts(d) {
        return Err(family.parity_error(d));
    }
    let v = Answer::Value;
    let (mut p_a, mut p_b) = (Vec::with_capacity(d), Vec::with_capacity(d));
    let (mut flips_a, mut flips_b) = (Vec::with_capacity(d), Vec::with_capacity(d));
    match family {
        Family::ManyAnswers => {
            let q = QuestionLabel::Index;
            let a = |x| strategy.alice_measurement(q(x));
            let b = |y| strategy.bob_measurement(q(y));
            for k in 0..d {
                p_a.push(a(0)?.require(v(k))?.clone());
            }
            for m in 0..(d - 1) / 2 {
                let i = 2 * m;
                let blk = bob_block(b(0)?, b(1)?, v(i), v(i + 1), block_params(state, m, false)?.mu)?;
                p_b.push(blk.plus);
                p_b.push(blk.minus);
                flips_a.push(alice_flip(a(1)?, v(i), v(i + 1))?);
                flips_b.push(blk.x);
                let j = i + 1;
                let blk = bob_block(b(2)?, b(3)?, v(j), v(j + 1), block_params(state, m, true)?.mu)?;
                flips_a.push(alice_flip(a(2)?, v(j), v(j + 1))?);
                flips_b.push(blk.x);
            }
            p_b.push(b(0)?.require(v(d - 1))?.clone());
        }
        Family::ManyQuestions => {
            let q = QuestionLabel::block;
            let a = |m, t| strategy.alice_measurement(q(m, t));
            let b = |m, t| strategy.bob_measurement(q(m, t));
            for m in 0..d / 2 {
                let az = a(m, Tag::Z)?;
                p_a.push(az.require(v(0))?.clone());
                p_a.push(az.require(v(1))?.clone());
                let mu = block_params(state, m, false)?.mu;
                let blk = bob_block(b(m, Tag::Z)?, b(m, Tag::X)?, v(0), v(1), mu)?;
                p_b.push(blk.plus);
                p_b.push(blk.minus);
                flips_a.push(alice_flip(a(m, Tag::X)?, v(0), v(1))?);
                flips_b.push(blk.x);
                if 2 * m + 2 < d {
                    let mu = block_params(state, m, true)?.mu;
                    let blk = bob_block(b(m, Tag::ZPrime)?, b(m, Tag::XPrime)?, v(0), v(1), mu)?;
                    flips_a.push(alice_flip(a(m, Tag::XPrime)?, v(1), v(2))?);
                    flips_b.push(blk.x);
                }
            }
        }
    }
    let (na, nb) = (strategy.dim_a(), strategy.dim_b());
    let m = strategy.state().coefficient_matrix(1)?;
    let omega = C64::from_polar(1.0, 2.0 * PI / d as f64);
    let z_a = clock(&orthogonalize_matrix(&p_a, &m, Side::Left)?, omega, na);
    let z_b = clock(&orthogonalize_matrix(&p_b, &m, Side::Right)?, omega, nb);
    Ok(ExtractionKit {
        d,
        p_a,
        p_b,
        chain_x_a: product_chain(&flips_a, na),
        chain_x_b: product_chain(&flips_b, nb),
        z_a,
        z_b,
        omega,
    })
}

/// `Σ_k ω^k Q_k + (1 − Σ_k Q_k)`.
fn clock(q: &[CMatrix], omega: C64, n: usize) -> CMatrix {
    let mut out = &CMatrix::identity(n) - &CMatrix::sum(n, q);
    for (k, qk) in q.iter().enumerate() {
        out = &out + &qk.scale(omega.powu(k as u32));
    }
    out
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

/// `(A ⊗ B)ψ` on the coefficient matrix: `A M Bᵀ`.
fn act(a: Option<&CMatrix>, m: &CMatrix, b: Option<&CMatrix>) -> CMatrix {
    let left = a.map_or_else(|| m.clone(), |a| a * m);
    match b {
        Some(b) => &left * &b.transpose(),
        None => left,
    }
}

fn on(side: Side, op: &CMatrix, m: &CMatrix) -> CMatrix {
    match side {
        Side::Left => act(Some(op), m, None),
        Side::Right => act(None, m, Some(op)),
    }
}

/// Pairwise orthogonal projections near `p_list`, chosen by symmetric
/// (Löwdin) orthogonalization of their ranges. When the ranges together
/// exceed the space, the directions carrying the least weight of `psi` are
/// dropped first. `psi` is bipartite and the projections act on its first
/// factor.
pub fn orthogonalize(p_list: &[CMatrix], psi: &PureState) -> Result<Vec<CMatrix>> {
    orthogonalize_matrix(p_list, &psi.coefficient_matrix(1)?, Side::Left)
}

fn orthogonalize_matrix(p_list: &[CMatrix], m: &CMatrix, side: Side) -> Result<Vec<CMatrix>> {
    let n = match side {
        Side::Left => m.rows(),
        Side::Right => m.cols(),
    };
    if p_list.iter().any(|p| p.rows() != n || p.cols() != n) {
        return Err(Error::Dimension("projections do not act on the state".into()));
    }
    let mut cols: Vec<(usize, f64, CMatrix)> = Vec::new();
    for (i, p) in p_list.iter().enumerate() {
        let (vals, vecs) = p.eigh();
        let keep: Vec<usize> = (0..n).filter(|&k| vals[k] > 0.5).collect();
        if keep.is_empty() {
            continue;
        }
        let basis = CMatrix::from_fn(n, keep.len(), |r, c| vecs.get(r, keep[c]));
        let proj = on(side, &(&basis * &basis.adjoint()), m);
        let reduced = match side {
            Side::Left => &(&basis.adjoint() * &proj) * &(&proj.adjoint() * &basis),
            Side::Right => {
                let t = &basis.adjoint() * &proj.transpose();
                &t * &t.adjoint()
            }
        };
        let (w, u) = reduced.eigh();
        let rotated = &basis * &u;
        for (k, &wk) in w.iter().enumerate() {
            cols.push((i, wk, rotated.columns(k, 1)));
        }
    }
    if cols.len() > n {
        let mut order: Vec<usize> = (0..cols.len()).collect();
        order.sort_by(|&x, &y| cols[y].1.total_cmp(&cols[x].1));
        let mut keep = vec![false; cols.len()];
        for &k in &order[..n] {
            keep[k] = true;
        }
        cols = cols.into_iter().zip(keep).filter(|(_, k)| *k).map(|(c, _)| c).collect();
    }
    let mut out = vec![CMatrix::zeros(n, n); p_list.len()];
    if cols.is_empty() {
        return Ok(out);
    }
    let stacked = CMatrix::hstack(&cols.iter().map(|c| c.2.clone()).collect::<Vec<_>>())?;
    let (u, _, v) = stacked.svd();
    let q = &u * &v.adjoint();
    for (k, (owner, _, _)) in cols.iter().enumerate() {
        let col = q.columns(k, 1);
        out[*owner] = &out[*owner] + &(&col * &col.adjoint());
    }
    Ok(out)
}

/// Residuals `ε₁…ε₄` of the kit on `psi`. Only ratios of `c` enter.
pub fn yn_residuals(kit: &ExtractionKit, psi: &PureState, c: &[f64]) -> Result<ResidualReport> {
    let m = psi.coefficient_matrix(1)?;
    if c.len() != kit.d {
        return Err(Error::Dimension(format!("expected {} coefficients", kit.d)));
    }
    if m.rows() != kit.z_a.rows() || m.cols() != kit.z_b.rows() {
        return Err(Error::Dimension("kit does not act on the state".into()));
    }
    let d = kit.d;
    let pa: Vec<CMatrix> = kit.p_a.iter().map(|p| act(Some(p), &m, None)).collect();
    let mut eps1 = 0.0f64;
    for i in 0..d {
        for (j, pj) in pa.iter().enumerate() {
            if i != j {
                eps1 = eps1.max((&kit.p_a[i] * pj).norm_fro());
            }
        }
    }
    let eps2 = (&CMatrix::sum(m.rows(), &pa) - &m).norm_fro();
    let mut eps3 = 0.0f64;
    let mut eps4 = 0.0f64;
    for k in 0..d {
        eps3 = eps3.max((&pa[k] - &act(None, &m, Some(&kit.p_b[k]))).norm_fro());
        let moved = act(Some(&kit.chain_x_a[k]), &pa[k], Some(&kit.chain_x_b[k]));
        eps4 = eps4.max((&moved - &pa[0].scale_real(c[k] / c[0])).norm_fro());
    }
    let overall = eps1.max(eps2).max(eps3).max(eps4);
    Ok(ResidualReport {
        eps1,
        eps2,
        eps3,
        eps4,
        overall,
    })
}

/// Result of the swap circuit.
#[derive(Clone, Debug)]
pub struct SwapOutcome {
    /// `Φ(ψ ⊗ |00⟩)` on `A ⊗ A′ ⊗ B ⊗ B′`.
    pub output: PureState,
    /// Coefficient matrix of `(1/c_0) P_A^{(0)} ψ`.
    pub junk: CMatrix,
    pub error: f64,
}

/// Applies the swap isometry with `d`-dimensional ancillas on both sides:
/// Fourier, controlled `Z^k`, inverse Fourier, controlled `X^{(k)}`. The
/// error is measured against `junk ⊗ Σ_j c_j|jj⟩`.
pub fn swap_isometry(kit: &ExtractionKit, psi: &PureState, c: &[f64], max_dim: usize) -> Result<SwapOutcome> {
    let m = psi.coefficient_matrix(1)?;
    let (na, nb) = (m.rows(), m.cols());
    let d = kit.d;
    if c.len() != d || na != kit.z_a.rows() || nb != kit.z_b.rows() {
        return Err(Error::Dimension("kit does not act on the state".into()));
    }
    let total = na
        .checked_mul(nb)
        .and_then(|x| x.checked_mul(d * d))
        .unwrap_or(usize::MAX);
    if total > max_dim {
        return Err(Error::Size {
            dim: total,
            cap: max_dim,
        });
    }
    let zero = CMatrix::zeros(na, nb);
    // t[k * d + l] is the AB coefficient matrix paired with ancillas |k⟩|l⟩.
    let mut t = vec![zero.clone(); d * d];
    t[0] = m.clone();
    let fourier = |t: &[CMatrix], sign: i32| -> Vec<CMatrix> {
        let f = |j: usize, k: usize| {
            C64::from_polar(
                1.0 / (d as f64).sqrt(),
                sign as f64 * 2.0 * PI * (j * k % d) as f64 / d as f64,
            )
        };
        let mut half = vec![zero.clone(); d * d];
        for k in 0..d {
            for j in 0..d {
                let w = f(k, j);
                for l in 0..d {
                    half[k * d + l] = &half[k * d + l] + &t[j * d + l].scale(w);
                }
            }
        }
        let mut out = vec![zero.clone(); d * d];
        for l in 0..d {
            for j in 0..d {
                let w = f(l, j);
                for k in 0..d {
                    out[k * d + l] = &out[k * d + l] + &half[k * d + j].scale(w);
                }
            }
        }
        out
    };
    t = fourier(&t, 1);
    let za = product_chain(&vec![kit.z_a.clone(); d - 1], na);
    let zb = product_chain(&vec![kit.z_b.clone(); d - 1], nb);
    for k in 0..d {
        for l in 0..d {
            t[k * d + l] = act(Some(&za[k]), &t[k * d + l], Some(&zb[l]));
        }
    }
    t = fourier(&t, -1);
    for k in 0..d {
        for l in 0..d {
            t[k * d + l] = act(Some(&kit.chain_x_a[k]), &t[k * d + l], Some(&kit.chain_x_b[l]));
        }
    }
    let junk = act(Some(&kit.p_a[0]), &m, None).scale_real(1.0 / c[0]);
    let mut err2 = 0.0;
    for k in 0..d {
        for l in 0..d {
            let diff = if k == l {
                &t[k * d + l] - &junk.scale_real(c[k])
            } else {
                t[k * d + l].clone()
            };
            err2 += diff.norm_fro().powi(2);
        }
    }
    let amps = crate::linalg::CVector::from_fn(na * d * nb * d, |idx, _| {
        let l = idx % d;
        let b = (idx / d) % nb;
        let k = (idx / (d * nb)) % d;
        let a = idx / (d * nb * d);
        t[k * d + l].get(a, b)
    });
    let output = PureState::normalized(vec![na, d, nb, d], amps)?;
    Ok(SwapOutcome {
        output,
        junk,
        error: err2.sqrt(),
    })
}

/// Kit, residuals and swap error for a strategy realizing `state`.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub kit: ExtractionKit,
    pub residuals: ResidualReport,
    pub error: f64,
}

pub fn extract(strategy: &Strategy, family: Family, state: &SchmidtState) -> Result<Extraction> {
    extract_with_cap(strategy, family, state, DEFAULT_MAX_DIM)
}

pub fn extract_with_cap(
    strategy: &Strategy,
    family: Family,
    state: &SchmidtState,
    max_dim: usize,
) -> Result<Extraction> {
    let kit = build_kit(strategy, family, state)?;
    let residuals = yn_residuals(&kit, strategy.state(), state.c())?;
    let out = swap_isometry(&kit, strategy.state(), state.c(), max_dim)?;
    Ok(Extraction {
        kit,
        residuals,
        error: out.error,
    })
}
