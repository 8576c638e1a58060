//! Spectral form factor (SFF) and partial spectral form factor (PSFF)
//! simulation for spin chains and Wigner-Dyson random-matrix ensembles.
//!
//! The crate is organized around the stages of a desk-scale numerical
//! experiment:
//!
//! - [`hilbert`]: spin registers, concrete disordered models (kicked chains
//!   `V3`/`V2`, a long-range Ising Hamiltonian) and time-evolution operators;
//! - [`rmt`]: sampling of GUE/GOE/CUE/COE matrices and the closed-form
//!   SFF/PSFF curves of those ensembles;
//! - [`spectral`]: exact form factors, eigenstate purities and overlaps,
//!   level statistics and ramp/plateau diagnostics;
//! - [`protocol`]: shot-by-shot simulation of the randomized-measurement
//!   protocol together with exact enumeration oracles;
//! - [`noise`]: global depolarization and decorrelated-unitary error models;
//! - [`stats`]: estimator variances, signal-to-noise ratios and measurement
//!   budgets.
//!
//! All numerics are generic over the floating-point precision through
//! [`RealScalar`]; concrete aliases for the common double-precision case are
//! exported at the crate root.

pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod noise;
pub mod protocol;
pub mod rmt;
pub mod rng;
pub mod scalar;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{DenseOperator, OperatorKind};
pub use scalar::RealScalar;

/// Double-precision complex entry type.
pub type C64 = num_complex::Complex<f64>;
/// Single-precision complex entry type.
pub type C32 = num_complex::Complex<f32>;

/// Dense operator at double precision, the default for all experiments.
pub type Operator = DenseOperator<f64>;
/// Dense operator at single precision.
pub type Operator32 = DenseOperator<f32>;

/// Pin the BLAS backend to one thread. Realization- and shot-level
/// parallelism is handled by rayon; letting OpenBLAS spawn its own pool on
/// top of that thrashes small-matrix workloads.
pub fn init_backend() {
    linalg::set_blas_threads(1);
}
