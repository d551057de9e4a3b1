//! Optimality certificates for minimum-error measurements.
//!
//! For an ensemble `{p_i, ρ_i}` and a POVM `{π_i}` define
//!
//! ```text
//! Γ   = Σ_i p_i ρ_i π_i
//! G_j = ½ Σ_i p_i (ρ_i π_i + π_i ρ_i) − p_j ρ_j  =  (Γ + Γ†)/2 − p_j ρ_j
//! ```
//!
//! The POVM maximizes the success probability iff every `G_j` is positive
//! semidefinite, in which case `Γ` is Hermitian, `G_k π_k = 0` for every `k`
//! and `π_j (p_j ρ_j − p_k ρ_k) π_k = 0` for every pair. A [`Certificate`]
//! records all of these residuals so a verdict can be audited.
//!
//! Residuals use the Frobenius norm.

use num_complex::Complex64;
use serde::Serialize;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::matrix::{
    frobenius_norm, hermitize, min_eigenvalue, ComplexMatrix, ComplexVector, HermitianMatrix,
};
use crate::measurement::{check_compatible, p_correct_unchecked, Povm};

pub const DEFAULT_TOLERANCE: f64 = 1e-7;

/// Minimum eigenvalues of different `G_j` closer than this (relative to
/// `max(1, |λ|)`) are treated as tied, and the smaller index wins.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub(crate) fn strictly_below(value: f64, current: f64) -> bool {
    value < current - TIE_TOLERANCE * current.abs().max(1.0)
}

/// `Γ = Σ_i p_i ρ_i π_i`, not symmetrized.
pub fn gamma(ens: &Ensemble, povm: &Povm) -> Result<ComplexMatrix> {
    check_compatible(ens, povm)?;
    Ok(gamma_unchecked(ens, povm.elements()))
}

pub(crate) fn gamma_unchecked(ens: &Ensemble, elements: &[HermitianMatrix]) -> ComplexMatrix {
    let d = ens.dim();
    let mut g = ComplexMatrix::zeros(d, d);
    for (i, pi) in elements.iter().enumerate() {
        g += ens.weighted_state(i) * pi.as_matrix();
    }
    g
}

/// `‖Γ − Γ†‖_F / max(1, ‖Γ‖_F)`.
pub fn gamma_hermiticity_residual(gamma: &ComplexMatrix) -> f64 {
    frobenius_norm(&(gamma - gamma.adjoint())) / frobenius_norm(gamma).max(1.0)
}

/// `G_j` for every outcome, given the symmetrized `Γ`.
pub(crate) fn g_operators_from(
    ens: &Ensemble,
    gamma_sym: &HermitianMatrix,
) -> Vec<HermitianMatrix> {
    (0..ens.len())
        .map(|j| {
            let m = gamma_sym.as_matrix() - ens.weighted_state(j);
            // Both terms are Hermitian; hermitize only removes rounding.
            hermitize(&m).expect("square by construction")
        })
        .collect()
}

pub fn g_operator(ens: &Ensemble, povm: &Povm, j: usize) -> Result<HermitianMatrix> {
    check_compatible(ens, povm)?;
    if j >= povm.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: povm.len(),
        });
    }
    let gamma_sym = hermitize(&gamma_unchecked(ens, povm.elements()))?;
    let m = gamma_sym.as_matrix() - ens.weighted_state(j);
    hermitize(&m)
}

pub fn g_operators(ens: &Ensemble, povm: &Povm) -> Result<Vec<HermitianMatrix>> {
    check_compatible(ens, povm)?;
    let gamma_sym = hermitize(&gamma_unchecked(ens, povm.elements()))?;
    Ok(g_operators_from(ens, &gamma_sym))
}

/// `max_{j,k} ‖π_j (p_j ρ_j − p_k ρ_k) π_k‖_F`.
pub fn equality_residual(ens: &Ensemble, povm: &Povm) -> Result<f64> {
    check_compatible(ens, povm)?;
    let n = ens.len();
    let weighted: Vec<ComplexMatrix> = (0..n).map(|i| ens.weighted_state(i)).collect();
    let mut worst = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            let diff = &weighted[j] - &weighted[k];
            let r = povm.element(j).as_matrix() * diff * povm.element(k).as_matrix();
            worst = worst.max(frobenius_norm(&r));
        }
    }
    Ok(worst)
}

/// `max_k ‖(Γ_sym − p_k ρ_k) π_k‖_F`.
pub fn zero_product_residual(ens: &Ensemble, povm: &Povm) -> Result<f64> {
    let gs = g_operators(ens, povm)?;
    Ok(zero_product_from(&gs, povm))
}

fn zero_product_from(gs: &[HermitianMatrix], povm: &Povm) -> f64 {
    gs.iter()
        .zip(povm.elements())
        .map(|(g, pi)| frobenius_norm(&(g.as_matrix() * pi.as_matrix())))
        .fold(0.0, f64::max)
}

/// The most negative eigenpair across all `G_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub outcome: usize,
    /// Smallest eigenvalue of `G_outcome` (signed).
    pub eigenvalue: f64,
    pub vector: ComplexVector,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Optimal,
    NotOptimal { witness: Witness },
}

impl Verdict {
    pub fn is_optimal(&self) -> bool {
        matches!(self, Verdict::Optimal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyOptions {
    pub tolerance: f64,
    /// Also require the equality-condition residuals to be within tolerance.
    pub strict: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub p_corr: f64,
    pub gamma_herm_residual: f64,
    pub gj_min_eigenvalues: Vec<f64>,
    pub equality_max_residual: f64,
    pub zero_product_max_residual: f64,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub strict: bool,
    /// Most negative eigenpair over all `G_j`, whatever the verdict.
    pub min_mode: Witness,
}

impl Certificate {
    pub fn is_optimal(&self) -> bool {
        self.verdict.is_optimal()
    }

    pub fn p_err(&self) -> f64 {
        1.0 - self.p_corr
    }
}

pub fn certify(ens: &Ensemble, povm: &Povm, tol: f64) -> Result<Certificate> {
    certify_with(
        ens,
        povm,
        CertifyOptions {
            tolerance: tol,
            strict: false,
        },
    )
}

/// Builds the full certificate.
///
/// Verdict is `Optimal` iff `min_j λ_min(G_j) ≥ −tol` and the Hermiticity
/// residual of `Γ` is at most `tol`; strict mode adds the two equality
/// residuals to the test.
pub fn certify_with(ens: &Ensemble, povm: &Povm, opts: CertifyOptions) -> Result<Certificate> {
    let tol = opts.tolerance;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidTolerance(tol));
    }
    check_compatible(ens, povm)?;

    let raw_gamma = gamma_unchecked(ens, povm.elements());
    let gamma_herm_residual = gamma_hermiticity_residual(&raw_gamma);
    let gamma_sym = hermitize(&raw_gamma)?;
    let gs = g_operators_from(ens, &gamma_sym);

    let mut gj_min_eigenvalues = Vec::with_capacity(gs.len());
    let mut min_mode: Option<Witness> = None;
    for (j, g) in gs.iter().enumerate() {
        let (value, vector) = min_eigenvalue(g)?;
        gj_min_eigenvalues.push(value);
        // Strict comparison: ties keep the smallest outcome index.
        if min_mode
            .as_ref()
            .is_none_or(|w| strictly_below(value, w.eigenvalue))
        {
            min_mode = Some(Witness {
                outcome: j,
                eigenvalue: value,
                vector,
            });
        }
    }
    let min_mode = min_mode.expect("POVM has at least one outcome");

    let equality_max_residual = equality_residual(ens, povm)?;
    let zero_product_max_residual = zero_product_from(&gs, povm);

    let mut optimal = min_mode.eigenvalue >= -tol && gamma_herm_residual <= tol;
    if opts.strict {
        optimal &= equality_max_residual <= tol && zero_product_max_residual <= tol;
    }
    let verdict = if optimal {
        Verdict::Optimal
    } else {
        Verdict::NotOptimal {
            witness: min_mode.clone(),
        }
    };

    Ok(Certificate {
        p_corr: p_correct_unchecked(ens, povm.elements()),
        gamma_herm_residual,
        gj_min_eigenvalues,
        equality_max_residual,
        zero_product_max_residual,
        verdict,
        tolerance: tol,
        strict: opts.strict,
        min_mode,
    })
}

/// `Σ_j Tr(G_j π_j)`; zero for every valid POVM by completeness.
pub fn g_trace_sum(ens: &Ensemble, povm: &Povm) -> Result<Complex64> {
    let gs = g_operators(ens, povm)?;
    Ok(gs
        .iter()
        .zip(povm.elements())
        .map(|(g, pi)| crate::matrix::trace_product(g.as_matrix(), pi.as_matrix()))
        .sum())
}
