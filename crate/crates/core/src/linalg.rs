//! Dense complex matrices, pure states and Schmidt decompositions.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;

/// Default cap on the total Hilbert-space dimension of a single computation.
pub const DEFAULT_MAX_DIM: usize = 1 << 14;

/// Absolute tolerance for structural checks.
pub const STRUCT_TOL: f64 = 1e-10;

/// Schmidt coefficients below this count as zero.
pub const RANK_THRESHOLD: f64 = 1e-10;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix(DMatrix<C64>);

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        CMatrix(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        CMatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_real_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        CMatrix(DMatrix::from_fn(rows, cols, |i, j| c64(f(i, j), 0.0)))
    }

    /// Builds a matrix from row vectors. Rows must share a length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(CMatrix(DMatrix::from_fn(r, c, |i, j| rows[i][j])))
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        CMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { ZERO })
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        CMatrix::from_real_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    /// `|u⟩⟨v|`
    pub fn outer(u: &CVector, v: &CVector) -> Self {
        CMatrix(u * v.adjoint())
    }

    /// Rank-one projector onto the span of `v` (normalized internally).
    pub fn projector_onto(v: &CVector) -> Self {
        let n = v.norm();
        let u = v / c64(n, 0.0);
        CMatrix::outer(&u, &u)
    }

    pub fn from_dmatrix(m: DMatrix<C64>) -> Self {
        CMatrix(m)
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.0[(i, j)] = v;
    }

    pub fn adjoint(&self) -> Self {
        CMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        CMatrix(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        CMatrix(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(c64(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.0 * v
    }

    pub fn column(&self, j: usize) -> CVector {
        self.0.column(j).into_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm_fro(&self) -> f64 {
        self.0.norm()
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        if self.rows() == 0 || self.cols() == 0 {
            return 0.0;
        }
        self.0.clone().singular_values().iter().fold(0.0_f64, |a, &b| a.max(b))
    }

    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.0 - self.0.adjoint()).norm()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_finite() && self.hermitian_deviation() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        if !self.is_square() || !self.is_finite() {
            return false;
        }
        let n = self.rows();
        (self.0.adjoint() * &self.0 - DMatrix::<C64>::identity(n, n)).norm() <= tol
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && (&self.0 * &self.0 - &self.0).norm() <= tol
    }

    /// Hermitian part `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        CMatrix((&self.0 + self.0.adjoint()) * c64(0.5, 0.0))
    }

    /// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
    /// Only the Hermitian part of `self` is used.
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        let n = self.rows();
        if n == 0 {
            return (Vec::new(), CMatrix::zeros(0, 0));
        }
        let h = self.hermitian_part();
        let evd = h
            .to_faer()
            .self_adjoint_eigen(faer::Side::Lower)
            .expect("Hermitian eigensolver converges on finite input");
        let s = evd.S().column_vector();
        let values = (0..n).map(|k| s[k].re).collect();
        (values, CMatrix::from_faer(evd.U()))
    }

    /// Applies `f` to the spectrum of the Hermitian part: `V f(Λ) V†`.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> C64) -> Self {
        let (vals, v) = self.eigh();
        let d: Vec<C64> = vals.iter().map(|&x| f(x)).collect();
        let mut scaled = v.0.clone();
        for (j, s) in d.iter().enumerate() {
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= s;
            }
        }
        CMatrix(scaled * v.0.adjoint())
    }

    /// Spectral projector onto eigenvalues satisfying `keep`.
    pub fn spectral_projector(&self, keep: impl Fn(f64) -> bool) -> Self {
        self.hermitian_map(|x| if keep(x) { ONE } else { ZERO })
    }

    /// Thin singular value decomposition with values sorted descending.
    /// Returns `(U, s, V)` with `self = U diag(s) V†`.
    pub fn svd(&self) -> (CMatrix, Vec<f64>, CMatrix) {
        let k = self.rows().min(self.cols());
        if k == 0 {
            return (
                CMatrix::zeros(self.rows(), 0),
                Vec::new(),
                CMatrix::zeros(self.cols(), 0),
            );
        }
        let svd = self.to_faer().thin_svd().expect("SVD converges on finite input");
        let s = svd.S().column_vector();
        let values = (0..k).map(|i| s[i].re).collect();
        (CMatrix::from_faer(svd.U()), values, CMatrix::from_faer(svd.V()))
    }

    fn to_faer(&self) -> faer::Mat<C64> {
        faer::Mat::from_fn(self.rows(), self.cols(), |i, j| self.0[(i, j)])
    }

    fn from_faer(m: faer::MatRef<'_, C64>) -> CMatrix {
        CMatrix(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]))
    }

    /// Orthonormal basis of the column range, columns with singular value above `tol`.
    pub fn range_basis(&self, tol: f64) -> CMatrix {
        let (u, s, _) = self.svd();
        let r = s.iter().filter(|&&x| x > tol).count();
        CMatrix(u.0.columns(0, r).into_owned())
    }

    /// Horizontal concatenation.
    pub fn hstack(blocks: &[CMatrix]) -> Result<CMatrix> {
        let rows = blocks.first().map_or(0, CMatrix::rows);
        if blocks.iter().any(|b| b.rows() != rows) {
            return Err(Error::Dimension("hstack row mismatch".into()));
        }
        let cols: usize = blocks.iter().map(CMatrix::cols).sum();
        let mut out = DMatrix::zeros(rows, cols);
        let mut off = 0;
        for b in blocks {
            out.columns_mut(off, b.cols()).copy_from(&b.0);
            off += b.cols();
        }
        Ok(CMatrix(out))
    }

    /// Sub-matrix of the given columns.
    pub fn columns(&self, start: usize, count: usize) -> CMatrix {
        CMatrix(self.0.columns(start, count).into_owned())
    }

    /// Zero-pads a square matrix to size `n`, keeping it in the top-left corner.
    pub fn embed(&self, n: usize) -> CMatrix {
        let mut out = DMatrix::zeros(n, n);
        out.view_mut((0, 0), (self.rows(), self.cols())).copy_from(&self.0);
        CMatrix(out)
    }

    pub fn sum<'a>(n: usize, items: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
        let mut acc = DMatrix::zeros(n, n);
        for m in items {
            acc += &m.0;
        }
        CMatrix(acc)
    }
}

impl<'a> Mul<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &'a CMatrix) -> CMatrix {
        CMatrix(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &'a CMatrix) -> CMatrix {
        CMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &'a CMatrix) -> CMatrix {
        CMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-&self.0)
    }
}

/// Kronecker product under the default dimension cap.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    tensor_with_cap(a, b, DEFAULT_MAX_DIM)
}

pub fn tensor_with_cap(a: &CMatrix, b: &CMatrix, cap: usize) -> Result<CMatrix> {
    let rows = checked_dim(a.rows(), b.rows(), cap)?;
    let cols = checked_dim(a.cols(), b.cols(), cap)?;
    debug_assert!(rows <= cap && cols <= cap);
    Ok(CMatrix(a.0.kronecker(&b.0)))
}

fn checked_dim(x: usize, y: usize, cap: usize) -> Result<usize> {
    match x.checked_mul(y) {
        Some(d) if d <= cap => Ok(d),
        Some(d) => Err(Error::Size { dim: d, cap }),
        None => Err(Error::Size { dim: usize::MAX, cap }),
    }
}

/// Normalized vector on a tensor product of subsystems.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    dims: Vec<usize>,
    amps: CVector,
}

impl PureState {
    /// Validates length and unit norm within 1e-12.
    pub fn new(dims: Vec<usize>, amps: CVector) -> Result<Self> {
        let s = Self::unchecked(dims, amps)?;
        let n = s.amps.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("state norm {n} is not 1")));
        }
        Ok(s)
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(dims: Vec<usize>, amps: CVector) -> Result<Self> {
        let n = amps.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Validation("cannot normalize a zero vector".into()));
        }
        Self::unchecked(dims, amps.map(|z| z / n))
    }

    fn unchecked(dims: Vec<usize>, amps: CVector) -> Result<Self> {
        let total: usize = dims.iter().product();
        if dims.is_empty() || total != amps.len() {
            return Err(Error::Dimension(format!(
                "dims {dims:?} do not match amplitude length {}",
                amps.len()
            )));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("non-finite amplitude".into()));
        }
        Ok(PureState { dims, amps })
    }

    /// `Σ c_i |i⟩|i⟩` on local dimensions `(da, db)`.
    pub fn from_schmidt(c: &[f64], da: usize, db: usize) -> Result<Self> {
        if c.len() > da.min(db) {
            return Err(Error::Dimension("too many Schmidt coefficients".into()));
        }
        let mut amps = CVector::zeros(da * db);
        for (i, &ci) in c.iter().enumerate() {
            amps[i * db + i] = c64(ci, 0.0);
        }
        PureState::new(vec![da, db], amps)
    }

    /// Bipartite state from its `da × db` coefficient matrix `M[i,j] = ⟨ij|ψ⟩`.
    pub fn from_coefficients(m: &CMatrix) -> Result<Self> {
        let (da, db) = (m.rows(), m.cols());
        let amps = CVector::from_fn(da * db, |k, _| m.get(k / db, k % db));
        PureState::new(vec![da, db], amps)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// Local dimensions for a cut after the first `cut` subsystems.
    pub fn split(&self, cut: usize) -> Result<(usize, usize)> {
        if cut == 0 || cut >= self.dims.len() {
            return Err(Error::Validation(format!(
                "cut {cut} is not a bipartition of {} subsystems",
                self.dims.len()
            )));
        }
        Ok((self.dims[..cut].iter().product(), self.dims[cut..].iter().product()))
    }

    /// Coefficient matrix for the cut after the first `cut` subsystems.
    pub fn coefficient_matrix(&self, cut: usize) -> Result<CMatrix> {
        let (da, db) = self.split(cut)?;
        Ok(CMatrix::from_fn(da, db, |i, j| self.amps[i * db + j]))
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps.dotc(&other.amps)
    }
}

/// Schmidt coefficients and bases of a bipartite pure state.
#[derive(Clone, Debug)]
pub struct SchmidtSpectrum {
    coefficients: Vec<f64>,
    left: CMatrix,
    right: CMatrix,
}

impl SchmidtSpectrum {
    /// Spectrum of `Σ c_i|ii⟩` in the computational basis. Coefficients are sorted.
    pub fn from_coefficients(c: &[f64]) -> Result<Self> {
        if c.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Validation("Schmidt coefficients must be nonnegative".into()));
        }
        let mut idx: Vec<usize> = (0..c.len()).collect();
        idx.sort_by(|&a, &b| c[b].total_cmp(&c[a]));
        let coefficients: Vec<f64> = idx.iter().map(|&i| c[i]).collect();
        let total: f64 = coefficients.iter().map(|x| x * x).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!("squared coefficients sum to {total}")));
        }
        let n = c.len();
        let basis = CMatrix::from_real_fn(n, n, |i, j| if i == idx[j] { 1.0 } else { 0.0 });
        Ok(SchmidtSpectrum {
            coefficients,
            left: basis.clone(),
            right: basis,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Columns `u_i` with `ψ = Σ λ_i u_i ⊗ v_i`.
    pub fn left(&self) -> &CMatrix {
        &self.left
    }

    pub fn right(&self) -> &CMatrix {
        &self.right
    }

    pub fn rank(&self) -> usize {
        self.coefficients.iter().filter(|&&x| x > RANK_THRESHOLD).count()
    }

    /// Rebuilds the coefficient matrix `Σ λ_i u_i v_iᵀ`.
    pub fn reconstruct(&self) -> CMatrix {
        let k = self.coefficients.len();
        let mut m = CMatrix::zeros(self.left.rows(), self.right.rows());
        for i in 0..k {
            let u = self.left.column(i);
            let v = self.right.column(i);
            let term = CMatrix::from_dmatrix(&u * v.transpose()).scale_real(self.coefficients[i]);
            m = &m + &term;
        }
        m
    }
}

/// Schmidt decomposition across the cut after the first `cut` subsystems.
pub fn schmidt(state: &PureState, cut: usize) -> Result<SchmidtSpectrum> {
    if (state.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Validation("state is not normalized".into()));
    }
    let m = state.coefficient_matrix(cut)?;
    let (u, s, v) = m.svd();
    Ok(SchmidtSpectrum {
        coefficients: s,
        left: u,
        right: v.conj(),
    })
}

/// Minimum distance from any unit vector of Schmidt rank at most `r` to the target.
pub fn low_rank_distance(target: &SchmidtSpectrum, r: usize) -> f64 {
    assert!(r >= 1, "rank bound must be at least 1");
    if r >= target.rank() {
        return 0.0;
    }
    // tail summed smallest first; 2 - 2 sqrt(1 - t) rewritten to avoid cancellation
    let tail: f64 = target.coefficients[r..].iter().rev().map(|x| x * x).sum();
    let head = (1.0 - tail).max(0.0);
    (2.0 * tail / (1.0 + head.sqrt())).sqrt()
}
