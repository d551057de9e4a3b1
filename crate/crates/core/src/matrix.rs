//! Dense complex matrices, Hermitian wrappers and spectral decomposition.
//!
//! All operators in this crate (states, probability operators, `Γ`, the
//! `G_j` witnesses) are small dense complex matrices. [`HermitianMatrix`]
//! carries the Hermiticity guarantee; [`Spectrum`] is its full real
//! eigendecomposition with a deterministic eigenvector convention.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Default Hermiticity tolerance: max entrywise `|M[a][b] - conj(M[b][a])|`.
pub const HERM_TOL: f64 = 1e-10;

/// Relative eigenpair residual bound, `‖Mv - λv‖ <= EIGEN_RESIDUAL_TOL · ‖M‖`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

const MAX_JACOBI_SWEEPS: usize = 100;

/// Components below this modulus are skipped when fixing eigenvector phase.
const PHASE_EPS: f64 = 1e-12;

/// Max entrywise deviation from Hermiticity.
pub fn hermiticity_residual(m: &ComplexMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in a..n {
            worst = worst.max((m[(a, b)] - m[(b, a)].conj()).norm());
        }
    }
    worst
}

pub fn frobenius_norm(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Tr(AB)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `⟨v|M|v⟩`, real part only (exact for Hermitian `M`).
pub fn expectation(m: &ComplexMatrix, v: &ComplexVector) -> f64 {
    let n = v.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for b in 0..n {
            row += m[(a, b)] * v[b];
        }
        acc += v[a].conj() * row;
    }
    acc.re
}

/// The rank-one operator `|v⟩⟨v|`.
pub fn outer(v: &ComplexVector) -> ComplexMatrix {
    v * v.adjoint()
}

fn check_square(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// A dense complex matrix that is Hermitian within a tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: ComplexMatrix,
}

impl HermitianMatrix {
    /// Wraps `m` if it is square and Hermitian within [`HERM_TOL`].
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, HERM_TOL)
    }

    pub fn with_tolerance(m: ComplexMatrix, tolerance: f64) -> Result<Self> {
        check_square(&m)?;
        let residual = hermiticity_residual(&m);
        // NaN residual must fail too.
        if !(residual <= tolerance) {
            return Err(Error::NotHermitian {
                residual,
                tolerance,
            });
        }
        Ok(Self { inner: m })
    }

    pub(crate) fn from_hermitian_unchecked(m: ComplexMatrix) -> Self {
        debug_assert!(hermiticity_residual(&m) <= HERM_TOL);
        Self { inner: m }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: ComplexMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: ComplexMatrix::zeros(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Self {
            inner: ComplexMatrix::from_diagonal(&v),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            inner: self.inner.map(|z| z * factor),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.inner)
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        spectral_decompose(self)
    }

    pub fn min_eigenvalue(&self) -> Result<(f64, ComplexVector)> {
        min_eigenvalue(self)
    }
}

impl From<HermitianMatrix> for ComplexMatrix {
    fn from(h: HermitianMatrix) -> Self {
        h.inner
    }
}

/// Projects onto the Hermitian part, `(M + M†)/2`.
///
/// The result is exactly Hermitian in floating point, so the projection is
/// idempotent bit-for-bit.
pub fn hermitize(m: &ComplexMatrix) -> Result<HermitianMatrix> {
    check_square(m)?;
    let n = m.nrows();
    let mut out = ComplexMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            out[(a, b)] = (m[(a, b)] + m[(b, a)].conj()) * 0.5;
        }
    }
    Ok(HermitianMatrix { inner: out })
}

/// Full eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are ascending; eigenvectors are unit-norm, in the same order,
/// with the first component of modulus above `1e-12` made real positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<ComplexVector>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ_k f(λ_k) |v_k⟩⟨v_k|`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for (&lambda, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            let w = f(lambda);
            if w != 0.0 {
                out += outer(v) * Complex64::new(w, 0.0);
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply(|x| x)
    }

    /// Largest `‖Mv_k - λ_k v_k‖` over all pairs.
    pub fn max_residual(&self, m: &ComplexMatrix) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.eigenvectors)
            .map(|(&l, v)| (m * v - v * Complex64::new(l, 0.0)).norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn normalize_phase(v: &mut ComplexVector) {
    let norm = v.norm();
    if norm > 0.0 {
        v.unscale_mut(norm);
    }
    if let Some(c) = v.iter().copied().find(|c| c.norm() > PHASE_EPS) {
        let phase = c.conj() / c.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

/// Cyclic Jacobi sweeps on a copy of `m`; returns the diagonalized matrix and
/// the accumulated unitary whose columns are the eigenvectors.
fn jacobi(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = ComplexMatrix::identity(n, n);
    jacobi_in_place(&mut a, &mut v)?;
    Ok((a, v))
}

/// Diagonalizes `a` in place, leaving the eigenvectors in the columns of `v`.
fn jacobi_in_place(a: &mut ComplexMatrix, v: &mut ComplexMatrix) -> Result<()> {
    let n = a.nrows();
    v.fill_with_identity();
    let scale = frobenius_norm(a);
    if scale == 0.0 {
        return Ok(());
    }
    let threshold = (f64::EPSILON * scale).powi(2);
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off <= threshold {
            return Ok(());
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                // Phase e^{-iφ} on q makes the pivot real, then a real rotation.
                let phase = apq.conj() / mag;
                let zeta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let u_pp = Complex64::new(c, 0.0);
                let u_pq = Complex64::new(s, 0.0);
                let u_qp = phase * (-s);
                let u_qq = phase * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
            }
        }
    }
    Err(Error::NumericFailure(format!(
        "Jacobi eigensolver did not converge in {MAX_JACOBI_SWEEPS} sweeps"
    )))
}

fn check_finite(m: &HermitianMatrix) -> Result<()> {
    if m.inner
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::NumericFailure("non-finite matrix entry".into()));
    }
    Ok(())
}

/// Ascending eigenvalue order; a stable sort keeps Jacobi's column order on ties.
fn ascending_order(diag: &ComplexMatrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..diag.nrows()).collect();
    order.sort_by(|&a, &b| diag[(a, a)].re.total_cmp(&diag[(b, b)].re));
    order
}

pub fn spectral_decompose(m: &HermitianMatrix) -> Result<Spectrum> {
    check_finite(m)?;
    let (diag, vecs) = jacobi(&m.inner)?;
    let mut eigenvalues = Vec::with_capacity(m.dim());
    let mut eigenvectors = Vec::with_capacity(m.dim());
    for k in ascending_order(&diag) {
        let mut v: ComplexVector = vecs.column(k).into_owned();
        normalize_phase(&mut v);
        eigenvalues.push(diag[(k, k)].re);
        eigenvectors.push(v);
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Smallest eigenvalue and its eigenvector (the first one in ascending order
/// when the minimum is degenerate).
pub fn min_eigenvalue(m: &HermitianMatrix) -> Result<(f64, ComplexVector)> {
    if m.dim() == 0 {
        return Err(Error::NumericFailure("empty matrix has no spectrum".into()));
    }
    check_finite(m)?;
    let (diag, vecs) = jacobi(&m.inner)?;
    let k = ascending_order(&diag)[0];
    let mut v: ComplexVector = vecs.column(k).into_owned();
    normalize_phase(&mut v);
    Ok((diag[(k, k)].re, v))
}

/// Smallest eigenvalue of the Hermitian matrix in `a` and the column of
/// `v` holding its eigenvector. Both buffers are overwritten.
pub(crate) fn min_eigen_in_place(
    a: &mut ComplexMatrix,
    v: &mut ComplexMatrix,
) -> Result<(f64, usize)> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericFailure("non-finite matrix entry".into()));
    }
    jacobi_in_place(a, v)?;
    let mut k = 0;
    for i in 1..a.nrows() {
        if a[(i, i)].re < a[(k, k)].re {
            k = i;
        }
    }
    Ok((a[(k, k)].re, k))
}
