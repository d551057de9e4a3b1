//! Instance generators and direct re-computations shared by the test targets.
#![allow(dead_code)]

use minerr::ensemble::{random_density, Ensemble};
use minerr::matrix::ComplexMatrix;
use minerr::measurement::{random_povm, Povm};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random mixed states with random (normalized uniform) priors.
pub fn random_ensemble<R: Rng>(rng: &mut R, dim: usize, n: usize) -> Ensemble {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let priors = raw.iter().map(|p| p / total).collect();
    let states = (0..n).map(|_| random_density(dim, rng).unwrap()).collect();
    Ensemble::new(priors, states).unwrap()
}

pub fn random_instance(seed: u64, dim: usize, n: usize) -> (Ensemble, Povm) {
    let mut r = rng(seed);
    let ens = random_ensemble(&mut r, dim, n);
    let povm = random_povm(n, dim, &mut r).unwrap();
    (ens, povm)
}

/// `Σ p_i Tr(ρ_i π_i)` straight from the definition.
pub fn p_direct(ens: &Ensemble, povm: &Povm) -> f64 {
    ens.priors()
        .iter()
        .zip(ens.states())
        .zip(povm.elements())
        .map(|((p, rho), pi)| p * (rho.as_matrix() * pi.as_matrix()).trace().re)
        .sum()
}

pub fn gamma_direct(ens: &Ensemble, povm: &Povm) -> ComplexMatrix {
    let d = ens.dim();
    let mut g = ComplexMatrix::zeros(d, d);
    for ((p, rho), pi) in ens.priors().iter().zip(ens.states()).zip(povm.elements()) {
        g += rho.as_matrix() * pi.as_matrix() * Complex64::new(*p, 0.0);
    }
    g
}

/// `G_j = ½ Σ_i p_i(ρ_i π_i + π_i ρ_i) − p_j ρ_j`.
pub fn g_direct(ens: &Ensemble, povm: &Povm) -> Vec<ComplexMatrix> {
    let g = gamma_direct(ens, povm);
    let sym = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    ens.priors()
        .iter()
        .zip(ens.states())
        .map(|(p, rho)| &sym - rho.as_matrix() * Complex64::new(*p, 0.0))
        .collect()
}

/// Helstrom's binary optimum, `½(1 + ‖p₁ρ₁ − p₂ρ₂‖₁)`, for 2×2 matrices in
/// closed form: the eigenvalues of a Hermitian 2×2 `Δ` are
/// `t/2 ± √((a−d)²/4 + |b|²)`.
pub fn helstrom_2x2(ens: &Ensemble) -> f64 {
    let delta = ens.states()[0].as_matrix() * Complex64::new(ens.priors()[0], 0.0)
        - ens.states()[1].as_matrix() * Complex64::new(ens.priors()[1], 0.0);
    let (a, d, b) = (delta[(0, 0)].re, delta[(1, 1)].re, delta[(0, 1)]);
    let half_trace = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    0.5 * (1.0 + (half_trace + radius).abs() + (half_trace - radius).abs())
}
