//! Probability operator measures: validation, outcome statistics and the
//! standard starting points for the solver.

use num_complex::Complex64;
use rand::Rng;

use crate::ensemble::{complex_gaussian, DensityMatrix, Ensemble, PSD_TOL};
use crate::error::{Error, Result};
use crate::matrix::{
    frobenius_norm, hermiticity_residual, hermitize, min_eigenvalue, spectral_decompose,
    trace_product, ComplexMatrix, HermitianMatrix, HERM_TOL,
};

/// Entrywise tolerance on `Σ_i π_i = I`.
pub const COMPLETENESS_TOL: f64 = 1e-9;

/// Eigenvalues at or below this are treated as kernel when taking `S^{-1/2}`.
pub const INV_SQRT_FLOOR: f64 = 1e-12;

/// Ordered probability operators: Hermitian, positive, summing to identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<HermitianMatrix>,
}

impl Povm {
    pub fn elements(&self) -> &[HermitianMatrix] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &HermitianMatrix {
        &self.elements[i]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn into_elements(self) -> Vec<HermitianMatrix> {
        self.elements
    }

    /// Max entry of `|Σ_i π_i - I|`.
    pub fn completeness_deviation(&self) -> f64 {
        completeness_deviation(self.elements.iter().map(|e| e.as_matrix()), self.dim())
    }
}

fn completeness_deviation<'a>(
    elements: impl Iterator<Item = &'a ComplexMatrix>,
    dim: usize,
) -> f64 {
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for e in elements {
        sum += e;
    }
    for i in 0..dim {
        sum[(i, i)] -= Complex64::new(1.0, 0.0);
    }
    sum.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Checks Hermiticity, positivity and completeness, in that order, and wraps
/// the (exactly hermitized) elements.
pub fn validate_povm<I, M>(elements: I) -> Result<Povm>
where
    I: IntoIterator<Item = M>,
    M: Into<ComplexMatrix>,
{
    let raw: Vec<ComplexMatrix> = elements.into_iter().map(Into::into).collect();
    let first = raw.first().ok_or(Error::EmptyPovm)?;
    let dim = first.nrows();
    let mut herm = Vec::with_capacity(raw.len());
    for (index, m) in raw.iter().enumerate() {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.nrows(),
            });
        }
        let residual = hermiticity_residual(m);
        if !(residual <= HERM_TOL) {
            return Err(Error::PovmNotHermitian { index, residual });
        }
        herm.push(hermitize(m)?);
    }
    for (index, h) in herm.iter().enumerate() {
        let (eigenvalue, _) = min_eigenvalue(h)?;
        if eigenvalue < -PSD_TOL {
            return Err(Error::PovmNotPositive { index, eigenvalue });
        }
    }
    let deviation = completeness_deviation(herm.iter().map(|h| h.as_matrix()), dim);
    if !(deviation <= COMPLETENESS_TOL) {
        return Err(Error::IncompleteSum { deviation });
    }
    Ok(Povm { elements: herm })
}

/// Outcome count must equal state count, and dimensions must agree.
pub(crate) fn check_compatible(ens: &Ensemble, povm: &Povm) -> Result<()> {
    if povm.len() != ens.len() {
        return Err(Error::CountMismatch {
            outcomes: povm.len(),
            states: ens.len(),
        });
    }
    if povm.dim() != ens.dim() {
        return Err(Error::DimensionMismatch {
            expected: ens.dim(),
            found: povm.dim(),
        });
    }
    Ok(())
}

fn real_trace(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let t = trace_product(a, b);
    debug_assert!(
        t.im.abs() <= 1e-10,
        "Tr of Hermitian product has imaginary part {}",
        t.im
    );
    t.re
}

/// `P(j) = Tr(ρ π_j)`.
pub fn outcome_probability(rho: &DensityMatrix, povm: &Povm, j: usize) -> Result<f64> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            found: rho.dim(),
        });
    }
    let e = povm.elements.get(j).ok_or(Error::IndexOutOfRange {
        index: j,
        len: povm.len(),
    })?;
    Ok(real_trace(rho.as_matrix(), e.as_matrix()))
}

/// `P_corr = Σ_i p_i Tr(ρ_i π_i)`.
pub fn p_correct(ens: &Ensemble, povm: &Povm) -> Result<f64> {
    check_compatible(ens, povm)?;
    Ok(p_correct_unchecked(ens, povm.elements()))
}

pub(crate) fn p_correct_unchecked(ens: &Ensemble, elements: &[HermitianMatrix]) -> f64 {
    ens.priors()
        .iter()
        .zip(ens.states())
        .zip(elements)
        .map(|((p, rho), pi)| p * real_trace(rho.as_matrix(), pi.as_matrix()))
        .sum()
}

/// `P_err = 1 - P_corr`.
pub fn p_error(ens: &Ensemble, povm: &Povm) -> Result<f64> {
    Ok(1.0 - p_correct(ens, povm)?)
}

/// `n` copies of `I/n`.
pub fn uniform_povm(n: usize, dim: usize) -> Result<Povm> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidConfig(format!(
            "uniform POVM needs n >= 1 and dim >= 1 (got n={n}, dim={dim})"
        )));
    }
    let e = HermitianMatrix::identity(dim).scaled(1.0 / n as f64);
    Ok(Povm {
        elements: vec![e; n],
    })
}

/// `π_i = S^{-1/2} p_i ρ_i S^{-1/2}` on the support of `S = Σ p_i ρ_i`, with
/// the kernel projector of `S` added to outcome 0.
pub fn square_root_measurement(ens: &Ensemble) -> Result<Povm> {
    let spectrum = spectral_decompose(&ens.average_state())?;
    let inv_sqrt = spectrum.apply(|x| {
        if x > INV_SQRT_FLOOR {
            x.powf(-0.5)
        } else {
            0.0
        }
    });
    let kernel = spectrum.apply(|x| if x > INV_SQRT_FLOOR { 0.0 } else { 1.0 });
    let has_kernel = spectrum.eigenvalues.iter().any(|&x| x <= INV_SQRT_FLOOR);

    let mut elements = Vec::with_capacity(ens.len());
    for i in 0..ens.len() {
        let w = ens.weighted_state(i);
        if has_kernel && frobenius_norm(&(&kernel * &w * &kernel)) > PSD_TOL {
            return Err(Error::SupportMismatch { index: i });
        }
        let mut pi = &inv_sqrt * w * &inv_sqrt;
        if i == 0 && has_kernel {
            pi += &kernel;
        }
        elements.push(hermitize(&pi)?);
    }
    validate_povm(elements)
}

/// Random POVM by completing random positive operators:
/// `π_i = S^{-1/2} A_i A_i† S^{-1/2}` with `S = Σ A_i A_i†`.
pub fn random_povm<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Result<Povm> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidConfig(format!(
            "random POVM needs n >= 1 and dim >= 1 (got n={n}, dim={dim})"
        )));
    }
    let blocks: Vec<ComplexMatrix> = (0..n)
        .map(|_| {
            let a = complex_gaussian(dim, rng);
            &a * a.adjoint()
        })
        .collect();
    let mut s = ComplexMatrix::zeros(dim, dim);
    for b in &blocks {
        s += b;
    }
    let spectrum = spectral_decompose(&hermitize(&s)?)?;
    if spectrum.eigenvalues[0] <= INV_SQRT_FLOOR {
        return Err(Error::NumericFailure(
            "singular random POVM normalizer".into(),
        ));
    }
    let inv_sqrt = spectrum.apply(|x| x.powf(-0.5));
    let elements = blocks
        .iter()
        .map(|b| hermitize(&(&inv_sqrt * b * &inv_sqrt)))
        .collect::<Result<Vec<_>>>()?;
    validate_povm(elements)
}
