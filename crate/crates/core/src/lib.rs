//! Minimum-error discrimination among a known ensemble of quantum states.
//!
//! The crate builds the optimality operators `Γ = Σ p_i ρ_i π_i` and
//! `G_j = (Γ + Γ†)/2 − p_j ρ_j`, certifies a measurement as optimal when
//! every `G_j` is positive semidefinite, and otherwise improves it by a
//! rank-one perturbation along the most negative eigenvector until the
//! certificate passes.
//!
//! ```
//! use minerr::{ensemble::{generate, EnsembleSpec}, solver::{solve, SolverConfig}};
//!
//! let pair = generate(&EnsembleSpec::PurePair { overlap: 0.5, priors: [0.5, 0.5] }).unwrap();
//! let trace = solve(&pair, None, &SolverConfig::default()).unwrap();
//! assert!(trace.converged);
//! assert!((trace.p_corr() - 0.5 * (1.0 + 0.75f64.sqrt())).abs() < 1e-6);
//! ```

// `!(x <= tol)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod matrix;
pub mod measurement;
pub mod solver;

pub use error::{Error, Result};
