//! Numerical diagnostics of chaos in finite-dimensional quantum dynamics.
//!
//! The crate is organised around a spin-`j` kicked top but most routines
//! accept arbitrary Hermitian observables and unitaries:
//!
//! * [`operator_space`]: spin algebra, the generalized Gell-Mann basis and
//!   Bloch-vector coordinates.
//! * [`dynamics`]: Floquet unitaries, Heisenberg orbits and error unitaries.
//! * [`tomography`]: continuous weak-measurement records, maximum-likelihood
//!   inversion and the positivity-constrained correction.
//! * [`metrics`]: information-gain quantifiers computed from the inverse
//!   covariance and the reconstruction.
//! * [`scrambling`]: OTOCs, echoes, operator Schmidt spectra and Krylov
//!   operator spreading.
//! * [`rmt`]: random-matrix ensembles and spectral statistics.
//!
//! Batch workloads take an [`Execution`] policy. With the default `parallel`
//! feature the `Parallel` policy fans tasks out over rayon; without it every
//! policy runs sequentially. Results never depend on the policy.

pub mod dynamics;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod metrics;
pub mod operator_space;
pub mod rmt;
pub mod scrambling;
pub mod seed;
pub mod tomography;

pub use error::{Error, Result};
pub use exec::Execution;
pub use num_complex::Complex64;

/// Dense complex matrix used for operators and unitaries.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense real matrix used for design matrices and covariances.
pub type RMatrix = nalgebra::DMatrix<f64>;
/// Dense real vector (Bloch vectors, records).
pub type RVector = nalgebra::DVector<f64>;
/// Dense complex vector (pure states).
pub type CVector = nalgebra::DVector<Complex64>;
