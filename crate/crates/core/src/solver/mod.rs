//! Perturbation ascent towards a minimum-error measurement.
//!
//! If some `G_j` has a negative eigenvalue `−λ` with eigenvector `|λ⟩`, the
//! perturbed measurement
//!
//! ```text
//! π'_i = (1 − ε|λ⟩⟨λ|) π_i (1 − ε|λ⟩⟨λ|) + ε(2 − ε)|λ⟩⟨λ| δ_ij
//! ```
//!
//! is again a POVM, and its success probability is exactly quadratic in `ε`
//! with slope `2λ` at the origin. [`solve`] repeats this step with the most
//! negative mode and the maximizing `ε` until the certificate passes.
//!
//! [`helstrom_binary`] and [`brute_force`] are independent reference optima.

mod oracle;

pub use oracle::{brute_force, helstrom_binary, BRUTE_FORCE_MAX_ITER};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificate::{certify, strictly_below, Certificate};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::matrix::{
    expectation, frobenius_norm, min_eigen_in_place, normalize_phase, trace_product, ComplexMatrix,
    ComplexVector,
};
use crate::measurement::{
    check_compatible, random_povm, square_root_measurement, uniform_povm, validate_povm, Povm,
};

/// Random restarts attempted when the ascent stalls on a negative mode.
pub const MAX_RESTARTS: usize = 5;

/// An eigenpair `G_outcome |λ⟩ = −λ |λ⟩` with `λ > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeMode {
    pub outcome: usize,
    /// Magnitude of the negative eigenvalue.
    pub lambda: f64,
    pub vector: ComplexVector,
}

/// Most negative eigenpair across all `G_j` plus `Γ`'s Hermiticity residual.
struct ModeScan {
    outcome: usize,
    min_eigenvalue: f64,
    vector: ComplexVector,
    gamma_herm_residual: f64,
}

/// Preallocated buffers for the ascent; all matrices are `d × d`.
struct Workspace {
    /// `p_i ρ_i`.
    weighted: Vec<ComplexMatrix>,
    gamma: ComplexMatrix,
    gamma_sym: ComplexMatrix,
    scratch: ComplexMatrix,
    vectors: ComplexMatrix,
    w: ComplexVector,
}

impl Workspace {
    fn new(ens: &Ensemble) -> Self {
        let d = ens.dim();
        Self {
            weighted: (0..ens.len()).map(|i| ens.weighted_state(i)).collect(),
            gamma: ComplexMatrix::zeros(d, d),
            gamma_sym: ComplexMatrix::zeros(d, d),
            scratch: ComplexMatrix::zeros(d, d),
            vectors: ComplexMatrix::zeros(d, d),
            w: ComplexVector::zeros(d),
        }
    }

    fn scan(&mut self, elements: &[ComplexMatrix]) -> Result<ModeScan> {
        let one = Complex64::new(1.0, 0.0);
        self.gamma.fill(Complex64::new(0.0, 0.0));
        for (rho, pi) in self.weighted.iter().zip(elements) {
            self.gamma.gemm(one, rho, pi, one);
        }
        let d = self.gamma.nrows();
        let mut skew = 0.0;
        for a in 0..d {
            for b in 0..d {
                skew += (self.gamma[(a, b)] - self.gamma[(b, a)].conj()).norm_sqr();
                self.gamma_sym[(a, b)] = (self.gamma[(a, b)] + self.gamma[(b, a)].conj()) * 0.5;
            }
        }
        let gamma_herm_residual = skew.sqrt() / frobenius_norm(&self.gamma).max(1.0);

        let mut best: Option<(usize, f64)> = None;
        let mut vector = ComplexVector::zeros(d);
        for (j, rho) in self.weighted.iter().enumerate() {
            for a in 0..d {
                for b in 0..d {
                    self.scratch[(a, b)] = self.gamma_sym[(a, b)] - rho[(a, b)];
                }
            }
            for a in 0..d {
                for b in a + 1..d {
                    let z = (self.scratch[(a, b)] + self.scratch[(b, a)].conj()) * 0.5;
                    self.scratch[(a, b)] = z;
                    self.scratch[(b, a)] = z.conj();
                }
                self.scratch[(a, a)].im = 0.0;
            }
            let (value, k) = min_eigen_in_place(&mut self.scratch, &mut self.vectors)?;
            if best.is_none_or(|b| strictly_below(value, b.1)) {
                best = Some((j, value));
                vector.copy_from(&self.vectors.column(k));
            }
        }
        normalize_phase(&mut vector);
        let (outcome, min_eigenvalue) = best.expect("at least one outcome");
        Ok(ModeScan {
            outcome,
            min_eigenvalue,
            vector,
            gamma_herm_residual,
        })
    }

    /// Gain quadratic along `v` for outcome `j`; needs a preceding `scan`.
    fn quadratic(
        &self,
        elements: &[ComplexMatrix],
        outcome: usize,
        v: &ComplexVector,
    ) -> GainQuadratic {
        let mut quadratic = 0.0;
        let mut target = 0.0;
        for (i, (rho, pi)) in self.weighted.iter().zip(elements).enumerate() {
            let r = expectation(rho, v);
            quadratic += r * expectation(pi, v);
            if i == outcome {
                target = r;
            }
        }
        quadratic -= target;
        let linear = 2.0 * (target - expectation(&self.gamma_sym, v));
        GainQuadratic { quadratic, linear }
    }

    fn p_correct(&self, elements: &[ComplexMatrix]) -> f64 {
        self.weighted
            .iter()
            .zip(elements)
            .map(|(rho, pi)| trace_product(rho, pi).re)
            .sum()
    }
}

/// Writes the perturbed elements into `out` as rank-one updates:
/// `π − ε(v w† + w v†) + ε² ⟨v|π|v⟩ v v†` with `w = π v`.
fn perturb_into(
    elements: &[ComplexMatrix],
    outcome: usize,
    v: &ComplexVector,
    epsilon: f64,
    w: &mut ComplexVector,
    out: &mut [ComplexMatrix],
) {
    let d = v.len();
    for (i, (pi, next)) in elements.iter().zip(out.iter_mut()).enumerate() {
        w.gemv(Complex64::new(1.0, 0.0), pi, v, Complex64::new(0.0, 0.0));
        let s = v.dotc(w).re;
        let mut coeff = epsilon * epsilon * s;
        if i == outcome {
            coeff += epsilon * (2.0 - epsilon);
        }
        for a in 0..d {
            for b in a..d {
                let cross = v[a] * w[b].conj() + w[a] * v[b].conj();
                let z = pi[(a, b)] - cross * epsilon + v[a] * v[b].conj() * coeff;
                let zt = pi[(b, a)].conj() - cross * epsilon + v[a] * v[b].conj() * coeff;
                let h = (z + zt) * 0.5;
                next[(a, b)] = h;
                next[(b, a)] = h.conj();
            }
            next[(a, a)].im = 0.0;
        }
    }
}

fn raw_elements(povm: &Povm) -> Vec<ComplexMatrix> {
    povm.elements()
        .iter()
        .map(|e| e.as_matrix().clone())
        .collect()
}

/// Globally most negative `(j, λ_min)` over all `G_j`, or `None` when every
/// `G_j` is positive within `tol`. Ties go to the smallest `j`.
pub fn find_negative_mode(ens: &Ensemble, povm: &Povm, tol: f64) -> Result<Option<NegativeMode>> {
    check_compatible(ens, povm)?;
    let scan = Workspace::new(ens).scan(&raw_elements(povm))?;
    if scan.min_eigenvalue >= -tol {
        return Ok(None);
    }
    Ok(Some(NegativeMode {
        outcome: scan.outcome,
        lambda: -scan.min_eigenvalue,
        vector: scan.vector,
    }))
}

fn check_mode(povm: &Povm, mode: &NegativeMode) -> Result<()> {
    if mode.outcome >= povm.len() {
        return Err(Error::IndexOutOfRange {
            index: mode.outcome,
            len: povm.len(),
        });
    }
    if mode.vector.len() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            found: mode.vector.len(),
        });
    }
    if (mode.vector.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::NumericFailure(format!(
            "mode vector has norm {}",
            mode.vector.norm()
        )));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    Ok(())
}

/// The perturbed measurement for `0 < ε ≤ 1`.
pub fn perturb(povm: &Povm, mode: &NegativeMode, epsilon: f64) -> Result<Povm> {
    check_epsilon(epsilon)?;
    check_mode(povm, mode)?;
    let elements = raw_elements(povm);
    let mut out = elements.clone();
    let mut w = ComplexVector::zeros(povm.dim());
    perturb_into(
        &elements,
        mode.outcome,
        &mode.vector,
        epsilon,
        &mut w,
        &mut out,
    );
    validate_povm(out)
}

/// `P'_corr(ε) − P_corr = a ε² + b ε` along a perturbation direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainQuadratic {
    /// `a = Σ_i p_i ⟨v|ρ_i|v⟩⟨v|π_i|v⟩ − p_j ⟨v|ρ_j|v⟩`.
    pub quadratic: f64,
    /// `b = −2 ⟨v|G_j|v⟩`, equal to `2λ` for an exact eigenvector.
    pub linear: f64,
}

impl GainQuadratic {
    pub fn eval(&self, epsilon: f64) -> f64 {
        (self.quadratic * epsilon + self.linear) * epsilon
    }

    /// Maximizer over `(0, 1]`.
    pub fn argmax(&self) -> f64 {
        if self.quadratic < 0.0 {
            (-self.linear / (2.0 * self.quadratic)).clamp(f64::MIN_POSITIVE, 1.0)
        } else {
            1.0
        }
    }
}

pub fn gain_quadratic(ens: &Ensemble, povm: &Povm, mode: &NegativeMode) -> Result<GainQuadratic> {
    check_compatible(ens, povm)?;
    check_mode(povm, mode)?;
    let elements = raw_elements(povm);
    let mut ws = Workspace::new(ens);
    ws.scan(&elements)?;
    Ok(ws.quadratic(&elements, mode.outcome, &mode.vector))
}

/// `P_corr(perturb(povm, mode, ε)) − P_corr(povm)`, in closed form.
pub fn gain(ens: &Ensemble, povm: &Povm, mode: &NegativeMode, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(gain_quadratic(ens, povm, mode)?.eval(epsilon))
}

/// `ε` in `(0, 1]` maximizing the exact quadratic gain.
pub fn best_epsilon(ens: &Ensemble, povm: &Povm, mode: &NegativeMode) -> Result<f64> {
    Ok(gain_quadratic(ens, povm, mode)?.argmax())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Uniform,
    SquareRoot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Certificate tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Minimum exact per-step gain before the ascent counts as stalled.
    pub stall_threshold: f64,
    /// Seeds the random restarts.
    pub seed: u64,
    /// Starting measurement when none is passed to [`solve`].
    pub start: StartKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: crate::certificate::DEFAULT_TOLERANCE,
            max_iter: 5_000_000,
            stall_threshold: 1e-14,
            seed: 0,
            start: StartKind::Uniform,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidTolerance(self.tol));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.stall_threshold >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "stall_threshold must be non-negative, got {}",
                self.stall_threshold
            )));
        }
        Ok(())
    }
}

/// One accepted ascent step; `p_corr` is the value after the step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Iteration {
    pub p_corr: f64,
    pub outcome: usize,
    pub lambda: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Certified,
    MaxIterations,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub iterations: Vec<Iteration>,
    pub final_certificate: Certificate,
    pub converged: bool,
    pub iterations_used: usize,
    pub solution: Povm,
    pub initial_p_corr: f64,
    pub stop_reason: StopReason,
    /// Random restarts performed after a stall (0 when none were needed).
    pub restarts: usize,
}

impl SolveTrace {
    pub fn p_corr(&self) -> f64 {
        self.final_certificate.p_corr
    }
}

/// Runs the ascent from `start` (or the configured default) until the
/// certificate passes, the iteration budget runs out, or the gain stalls.
///
/// On a stall with a negative mode still present, up to [`MAX_RESTARTS`]
/// seeded random starts are tried and the best trace is returned.
pub fn solve(ens: &Ensemble, start: Option<&Povm>, config: &SolverConfig) -> Result<SolveTrace> {
    config.validate()?;
    let start = match start {
        Some(p) => {
            check_compatible(ens, p)?;
            p.clone()
        }
        None => match config.start {
            StartKind::Uniform => uniform_povm(ens.len(), ens.dim())?,
            StartKind::SquareRoot => square_root_measurement(ens)?,
        },
    };

    let mut best = ascend(ens, start, config)?;
    if best.stop_reason != StopReason::Stalled {
        return Ok(best);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for attempt in 1..=MAX_RESTARTS {
        let restart = random_povm(ens.len(), ens.dim(), &mut rng)?;
        let trace = ascend(ens, restart, config)?;
        let better = (trace.converged && !best.converged)
            || (trace.converged == best.converged && trace.p_corr() > best.p_corr());
        let done = trace.converged;
        if better {
            best = trace;
        }
        best.restarts = attempt;
        if done {
            break;
        }
    }
    Ok(best)
}

fn ascend(ens: &Ensemble, start: Povm, config: &SolverConfig) -> Result<SolveTrace> {
    let tol = config.tol;
    let mut ws = Workspace::new(ens);
    let mut elements = raw_elements(&start);
    let mut next = elements.clone();
    let initial_p_corr = ws.p_correct(&elements);
    let mut p_corr = initial_p_corr;
    let mut iterations = Vec::new();

    let stop_reason = loop {
        let scan = ws.scan(&elements)?;
        if scan.min_eigenvalue >= -tol && scan.gamma_herm_residual <= tol {
            break StopReason::Certified;
        }
        if iterations.len() >= config.max_iter {
            break StopReason::MaxIterations;
        }
        if scan.min_eigenvalue >= 0.0 {
            // No ascent direction left, yet Γ is not Hermitian within tol.
            break StopReason::Stalled;
        }
        let quad = ws.quadratic(&elements, scan.outcome, &scan.vector);
        let epsilon = quad.argmax();
        if !(quad.eval(epsilon) >= config.stall_threshold) {
            break StopReason::Stalled;
        }
        perturb_into(
            &elements,
            scan.outcome,
            &scan.vector,
            epsilon,
            &mut ws.w,
            &mut next,
        );
        let next_p = ws.p_correct(&next);
        if !next_p.is_finite() {
            return Err(Error::NumericFailure(
                "success probability is not finite".into(),
            ));
        }
        if next_p <= p_corr {
            break StopReason::Stalled;
        }
        std::mem::swap(&mut elements, &mut next);
        p_corr = next_p;
        iterations.push(Iteration {
            p_corr,
            outcome: scan.outcome,
            lambda: -scan.min_eigenvalue,
            epsilon,
        });
    };

    let solution = validate_povm(elements)?;
    let final_certificate = certify(ens, &solution, tol)?;
    let converged = stop_reason == StopReason::Certified && final_certificate.is_optimal();
    Ok(SolveTrace {
        iterations_used: iterations.len(),
        iterations,
        final_certificate,
        converged,
        solution,
        initial_p_corr,
        stop_reason,
        restarts: 0,
    })
}

#[cfg(test)]
mod tests;
