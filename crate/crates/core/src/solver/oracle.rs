//! Reference optima used to cross-check the ascent.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{DensityMatrix, Ensemble, PRIOR_TOL};
use crate::error::{Error, Result};
use crate::matrix::{outer, spectral_decompose, ComplexMatrix, ComplexVector, HermitianMatrix};
use crate::measurement::{
    p_correct, random_povm, square_root_measurement, uniform_povm, validate_povm, Povm,
};

use super::{solve, SolverConfig};

/// Iteration budget for each ascent launched by [`brute_force`].
pub const BRUTE_FORCE_MAX_ITER: usize = 20_000;

const BLOCH_POLAR_STEPS: usize = 90;
const BLOCH_AZIMUTH_STEPS: usize = 180;

/// Eigenvalues of `p₁ρ₁ − p₂ρ₂` this close to zero count as ties.
const TIE_EPS: f64 = 1e-12;

/// Optimal binary measurement: `π₁` projects onto the non-negative
/// eigenspace of `Δ = p₁ρ₁ − p₂ρ₂` and `P_corr = ½(1 + Σ|eig Δ|)`.
pub fn helstrom_binary(
    p1: f64,
    rho1: &DensityMatrix,
    p2: f64,
    rho2: &DensityMatrix,
) -> Result<(Povm, f64)> {
    if !(p1 >= 0.0 && p2 >= 0.0) || (p1 + p2 - 1.0).abs() > PRIOR_TOL {
        return Err(Error::InvalidEnsemble(format!(
            "priors ({p1}, {p2}) are not a distribution"
        )));
    }
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho1.dim(),
            found: rho2.dim(),
        });
    }
    let d = rho1.dim();
    let delta =
        rho1.as_matrix() * Complex64::new(p1, 0.0) - rho2.as_matrix() * Complex64::new(p2, 0.0);
    let spectrum = spectral_decompose(&HermitianMatrix::new(delta)?)?;
    let scale = spectrum
        .eigenvalues
        .iter()
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let mut pi1 = ComplexMatrix::zeros(d, d);
    let mut abs_sum = 0.0;
    for (&l, v) in spectrum.eigenvalues.iter().zip(&spectrum.eigenvectors) {
        if l >= -TIE_EPS * scale {
            pi1 += outer(v);
        }
        abs_sum += l.abs();
    }
    let pi2 = ComplexMatrix::identity(d, d) - &pi1;
    let povm = validate_povm([pi1, pi2])?;
    Ok((povm, 0.5 * (1.0 + abs_sum)))
}

fn bloch_projector(theta: f64, phi: f64) -> ComplexMatrix {
    let v = ComplexVector::from_vec(vec![
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::from_polar((theta / 2.0).sin(), phi),
    ]);
    outer(&v)
}

/// Best measurement found by a desk-scale search: `budget` random POVMs,
/// the square-root and uniform measurements and, for two qubit states, a
/// Bloch-sphere grid of projective measurements. Each candidate is then
/// refined with a bounded ascent.
pub fn brute_force(ens: &Ensemble, budget: usize, seed: u64) -> Result<(Povm, f64)> {
    let (n, d) = (ens.len(), ens.dim());
    if d > 4 || n > 4 || budget == 0 {
        return Err(Error::GuardRail(format!("dim={d}, n={n}, budget={budget}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<Povm> = (0..budget)
        .map(|_| random_povm(n, d, &mut rng))
        .collect::<Result<_>>()?;
    if let Ok(srm) = square_root_measurement(ens) {
        starts.push(srm);
    }
    starts.push(uniform_povm(n, d)?);

    if n == 2 && d == 2 {
        let identity = ComplexMatrix::identity(2, 2);
        let mut grid_best: Option<(f64, Povm)> = None;
        for a in 0..=BLOCH_POLAR_STEPS {
            let theta = PI * a as f64 / BLOCH_POLAR_STEPS as f64;
            let azimuths = if a == 0 || a == BLOCH_POLAR_STEPS {
                1
            } else {
                BLOCH_AZIMUTH_STEPS
            };
            for b in 0..azimuths {
                let phi = 2.0 * PI * b as f64 / BLOCH_AZIMUTH_STEPS as f64;
                let p = bloch_projector(theta, phi);
                let povm = validate_povm([p.clone(), &identity - p])?;
                let value = p_correct(ens, &povm)?;
                if grid_best.as_ref().is_none_or(|(best, _)| value > *best) {
                    grid_best = Some((value, povm));
                }
            }
        }
        if let Some((_, povm)) = grid_best {
            starts.push(povm);
        }
    }

    let config = SolverConfig {
        max_iter: BRUTE_FORCE_MAX_ITER,
        seed,
        ..SolverConfig::default()
    };
    let mut best: Option<(f64, Povm)> = None;
    for start in &starts {
        let raw = p_correct(ens, start)?;
        let trace = solve(ens, Some(start), &config)?;
        let (value, povm) = if trace.p_corr() >= raw {
            (trace.p_corr(), trace.solution)
        } else {
            (raw, start.clone())
        };
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, povm));
        }
    }
    let (value, povm) = best.expect("at least the uniform start");
    Ok((povm, value))
}
