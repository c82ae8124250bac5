//! Algebraic Riccati equations through dichotomy projections of the
//! Hamiltonian operator matrix.
//!
//! The crate works on finite-dimensional models of control systems with
//! unbounded control and observation operators. Unboundedness is encoded by
//! the two Hilbert scales generated by `I + A A^H` and `I + A^H A`; the
//! Hamiltonian `T0 = [[A, -B B^H], [-C^H C, -A^H]]` is the same matrix in
//! every geometry, and only the weighted norm used to measure it changes.
//!
//! The pipeline is
//!
//! 1. [`hamiltonian::assemble`] builds `T0`, its split `S0 + R` and the block
//!    weights of the spaces `V0`, `V1` and `V`;
//! 2. [`dichotomy`] integrates `(1/λ)(T0 - λ)^{-1}` along vertical lines to get
//!    `L±` and `P± = T0 L±`, and checks them against an eigendecomposition
//!    oracle;
//! 3. [`riccati`] reads the angular operators off the invariant subspaces and
//!    verifies the Riccati equation, symmetry, sign and closed-loop spectrum.
//!
//! Everything numeric is generic over a real scalar `T: Real` (`f32` or
//! `f64`); the `*F64` aliases below are the instantiations the CLI and the
//! acceptance suite use.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dichotomy;
pub mod error;
pub mod hamiltonian;
pub mod hilbert_scale;
pub mod linalg;
pub mod pipeline;
pub mod policy;
pub mod problems;
pub mod quadrature;
pub mod riccati;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, Real};
pub use nalgebra::Complex;
pub use policy::NumericPolicy;

pub type MatF64 = CMat<f64>;
pub type VecF64 = CVec<f64>;
pub type HilbertScaleF64 = hilbert_scale::HilbertScale<f64>;
pub type SystemDataF64 = hamiltonian::SystemData<f64>;
pub type HamiltonianF64 = hamiltonian::HamiltonianMatrices<f64>;
pub type DichotomyResultF64 = dichotomy::DichotomyResult<f64>;
pub type RiccatiSolutionF64 = riccati::RiccatiSolution<f64>;

pub type MatF32 = CMat<f32>;
pub type SystemDataF32 = hamiltonian::SystemData<f32>;
pub type HamiltonianF32 = hamiltonian::HamiltonianMatrices<f32>;
