//! Density matrices, ensembles and fixture generators.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{hermitize, min_eigenvalue, ComplexMatrix, HermitianMatrix};

/// Positivity tolerance for states and probability operators.
pub const PSD_TOL: f64 = 1e-9;
/// Allowed deviation of `Tr ρ` from one.
pub const TRACE_TOL: f64 = 1e-9;
/// Allowed deviation of `Σ p_i` from one.
pub const PRIOR_TOL: f64 = 1e-9;

/// A Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: HermitianMatrix,
}

impl DensityMatrix {
    pub fn matrix(&self) -> &HermitianMatrix {
        &self.mat
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        self.mat.as_matrix()
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("dimension must be at least 1".into()));
        }
        Ok(Self {
            mat: HermitianMatrix::identity(dim).scaled(1.0 / dim as f64),
        })
    }
}

pub fn validate_density(m: HermitianMatrix) -> Result<DensityMatrix> {
    if m.dim() == 0 {
        return Err(Error::InvalidEnsemble(
            "density matrix has dimension 0".into(),
        ));
    }
    let trace = m.trace();
    if !((trace - 1.0).abs() <= TRACE_TOL) {
        return Err(Error::TraceNotOne { trace });
    }
    let (eigenvalue, _) = min_eigenvalue(&m)?;
    if eigenvalue < -PSD_TOL {
        return Err(Error::NotPositive { eigenvalue });
    }
    Ok(DensityMatrix { mat: m })
}

/// `|v⟩⟨v| / ⟨v|v⟩`.
pub fn pure_state(v: &[Complex64]) -> Result<DensityMatrix> {
    let norm_sqr: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if v.is_empty() || norm_sqr == 0.0 {
        return Err(Error::ZeroVector);
    }
    if !norm_sqr.is_finite() {
        return Err(Error::NumericFailure("non-finite state vector".into()));
    }
    let n = v.len();
    let m = ComplexMatrix::from_fn(n, n, |a, b| v[a] * v[b].conj() / norm_sqr);
    Ok(DensityMatrix {
        mat: hermitize(&m)?,
    })
}

/// Prior probabilities paired with density matrices of a shared dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    priors: Vec<f64>,
    states: Vec<DensityMatrix>,
}

impl Ensemble {
    pub fn new(priors: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidEnsemble(
                "at least one state is required".into(),
            ));
        }
        if priors.len() != states.len() {
            return Err(Error::InvalidEnsemble(format!(
                "{} priors for {} states",
                priors.len(),
                states.len()
            )));
        }
        let dim = states[0].dim();
        for s in &states[1..] {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
        }
        if let Some((i, p)) = priors
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::InvalidEnsemble(format!("prior {i} is {p}")));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOL {
            return Err(Error::InvalidEnsemble(format!("priors sum to {total}")));
        }
        Ok(Self { priors, states })
    }

    /// Equal priors `1/n`.
    pub fn uniform(states: Vec<DensityMatrix>) -> Result<Self> {
        let n = states.len().max(1);
        Self::new(vec![1.0 / n as f64; states.len()], states)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    /// `p_i ρ_i`.
    pub fn weighted_state(&self, i: usize) -> ComplexMatrix {
        self.states[i].as_matrix() * Complex64::new(self.priors[i], 0.0)
    }

    /// `S = Σ_i p_i ρ_i`.
    pub fn average_state(&self) -> HermitianMatrix {
        let d = self.dim();
        let mut s = ComplexMatrix::zeros(d, d);
        for i in 0..self.len() {
            s += self.weighted_state(i);
        }
        HermitianMatrix::from_hermitian_unchecked(s)
    }

    pub fn zero_prior_indices(&self) -> Vec<usize> {
        self.priors
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Recipes for test ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleSpec {
    /// Two qubit pure states with `|⟨ψ₁|ψ₂⟩| = overlap`.
    PurePair { overlap: f64, priors: [f64; 2] },
    /// Three qubit states with Bloch vectors 120° apart, equal priors.
    Trine,
    /// `n` Ginibre-normalized mixed states `AA†/Tr(AA†)`, uniform priors.
    RandomMixed { dim: usize, n: usize, seed: u64 },
}

pub fn generate(spec: &EnsembleSpec) -> Result<Ensemble> {
    match *spec {
        EnsembleSpec::PurePair { overlap, priors } => {
            if !(0.0..1.0).contains(&overlap) {
                return Err(Error::InvalidSpec(format!(
                    "overlap {overlap} outside [0, 1)"
                )));
            }
            if priors.iter().any(|p| !(p.is_finite() && *p >= 0.0))
                || (priors[0] + priors[1] - 1.0).abs() > PRIOR_TOL
            {
                return Err(Error::InvalidSpec(format!(
                    "priors {priors:?} are not a distribution"
                )));
            }
            let c = Complex64::new(overlap, 0.0);
            let s = Complex64::new((1.0 - overlap * overlap).sqrt(), 0.0);
            let zero = Complex64::new(0.0, 0.0);
            let one = Complex64::new(1.0, 0.0);
            let states = vec![pure_state(&[one, zero])?, pure_state(&[c, s])?];
            Ensemble::new(priors.to_vec(), states)
        }
        EnsembleSpec::Trine => {
            let states = (0..3)
                .map(|k| {
                    let theta = 2.0 * PI * k as f64 / 3.0;
                    pure_state(&[
                        Complex64::new(theta.cos(), 0.0),
                        Complex64::new(theta.sin(), 0.0),
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
            Ensemble::uniform(states)
        }
        EnsembleSpec::RandomMixed { dim, n, seed } => {
            if dim == 0 {
                return Err(Error::InvalidSpec("dim must be at least 1".into()));
            }
            if n == 0 {
                return Err(Error::InvalidSpec("n must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let states = (0..n)
                .map(|_| random_density(dim, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            Ensemble::uniform(states)
        }
    }
}

/// Square matrix with i.i.d. standard complex Gaussian entries.
pub fn complex_gaussian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Ginibre-normalized random state `AA†/Tr(AA†)`; full rank almost surely.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<DensityMatrix> {
    let a = complex_gaussian(dim, rng);
    let aa = &a * a.adjoint();
    let tr = aa.trace().re;
    let m = hermitize(&(aa / Complex64::new(tr, 0.0)))?;
    validate_density(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn maximally_mixed_qubit_is_valid() {
        let m = HermitianMatrix::identity(2).scaled(0.5);
        assert!(validate_density(m).is_ok());
    }

    #[test]
    fn negative_eigenvalue_is_rejected() {
        let err = validate_density(HermitianMatrix::from_real_diagonal(&[1.5, -0.5])).unwrap_err();
        match err {
            Error::NotPositive { eigenvalue } => {
                assert_abs_diff_eq!(eigenvalue, -0.5, epsilon = 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_trace_is_rejected() {
        let err = validate_density(HermitianMatrix::from_real_diagonal(&[0.5, 0.6])).unwrap_err();
        assert!(matches!(err, Error::TraceNotOne { trace } if (trace - 1.1).abs() < 1e-12));
    }

    #[test]
    fn pure_state_examples() {
        let r = pure_state(&[c(1., 0.), c(0., 0.)]).unwrap();
        assert_eq!(
            r.as_matrix(),
            HermitianMatrix::from_real_diagonal(&[1., 0.]).as_matrix()
        );

        let r = pure_state(&[c(1., 0.), c(1., 0.)]).unwrap();
        for z in r.as_matrix().iter() {
            assert_abs_diff_eq!(z.re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }

        let r = pure_state(&[c(1., 0.), c(0., 1.)]).unwrap();
        let want =
            ComplexMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(0., -0.5), c(0., 0.5), c(0.5, 0.)]);
        assert_abs_diff_eq!((r.as_matrix() - want).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_vector_is_rejected() {
        assert_eq!(
            pure_state(&[c(0., 0.), c(0., 0.)]).unwrap_err(),
            Error::ZeroVector
        );
        assert_eq!(pure_state(&[]).unwrap_err(), Error::ZeroVector);
    }

    #[test]
    fn pure_pair_has_requested_overlap() {
        for overlap in [0.0, 0.25, 0.5, 0.75, 0.9, 0.999] {
            let e = generate(&EnsembleSpec::PurePair {
                overlap,
                priors: [0.3, 0.7],
            })
            .unwrap();
            // |⟨ψ1|ψ2⟩|² = Tr(ρ1 ρ2) for pure states
            let f =
                crate::matrix::trace_product(e.states()[0].as_matrix(), e.states()[1].as_matrix());
            assert_abs_diff_eq!(f.re.sqrt(), overlap, epsilon = 1e-12);
        }
    }

    #[test]
    fn orthogonal_pair() {
        let e = generate(&EnsembleSpec::PurePair {
            overlap: 0.0,
            priors: [0.5, 0.5],
        })
        .unwrap();
        let f = crate::matrix::trace_product(e.states()[0].as_matrix(), e.states()[1].as_matrix());
        assert_abs_diff_eq!(f.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn trine_overlaps() {
        let e = generate(&EnsembleSpec::Trine).unwrap();
        assert_eq!(e.len(), 3);
        for i in 0..3 {
            assert_abs_diff_eq!(e.priors()[i], 1.0 / 3.0, epsilon = 1e-15);
            for j in 0..3 {
                if i != j {
                    let f = crate::matrix::trace_product(
                        e.states()[i].as_matrix(),
                        e.states()[j].as_matrix(),
                    );
                    assert_abs_diff_eq!(f.re, 0.25, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn random_mixed_is_seeded() {
        let spec = EnsembleSpec::RandomMixed {
            dim: 2,
            n: 3,
            seed: 7,
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = EnsembleSpec::RandomMixed {
            dim: 2,
            n: 3,
            seed: 8,
        };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            EnsembleSpec::PurePair {
                overlap: 1.0,
                priors: [0.5, 0.5],
            },
            EnsembleSpec::PurePair {
                overlap: -0.1,
                priors: [0.5, 0.5],
            },
            EnsembleSpec::PurePair {
                overlap: 0.5,
                priors: [0.5, 0.6],
            },
            EnsembleSpec::RandomMixed {
                dim: 2,
                n: 0,
                seed: 1,
            },
            EnsembleSpec::RandomMixed {
                dim: 0,
                n: 2,
                seed: 1,
            },
        ] {
            assert!(
                matches!(generate(&spec), Err(Error::InvalidSpec(_))),
                "{spec:?}"
            );
        }
    }

    #[test]
    fn ensemble_invariants() {
        let s = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(Ensemble::new(vec![0.5, 0.6], vec![s.clone(), s.clone()]).is_err());
        assert!(Ensemble::new(vec![-0.1, 1.1], vec![s.clone(), s.clone()]).is_err());
        assert!(Ensemble::new(vec![], vec![]).is_err());
        let s3 = DensityMatrix::maximally_mixed(3).unwrap();
        assert!(matches!(
            Ensemble::new(vec![0.5, 0.5], vec![s.clone(), s3]),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
        let e = Ensemble::new(vec![0.0, 1.0], vec![s.clone(), s]).unwrap();
        assert_eq!(e.zero_prior_indices(), vec![0]);
    }

    #[test]
    fn spec_json_shape() {
        let json = serde_json::to_string(&EnsembleSpec::Trine).unwrap();
        assert_eq!(json, r#"{"kind":"trine"}"#);
        let spec: EnsembleSpec =
            serde_json::from_str(r#"{"kind":"random_mixed","dim":2,"n":3,"seed":7}"#).unwrap();
        assert_eq!(
            spec,
            EnsembleSpec::RandomMixed {
                dim: 2,
                n: 3,
                seed: 7
            }
        );
    }
}
