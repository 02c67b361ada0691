//! Device scheduling for over-the-air federated learning.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: the small complex linear-algebra kernel (dominant
//!   singular pair by power iteration, Hermitian square root, sphere sampling).
//! * [`channel`]: i.i.d. Gaussian and geometric Rician/ULA channel generation.
//! * [`coordination`]: zero-forcing AirComp coordination and the computation
//!   error metric.
//! * [`scheduler`]: greedy matching-pursuit elimination, its bidirectional
//!   extension, a random-elimination baseline and an exhaustive oracle.
//! * [`irs`]: joint scheduling and phase tuning for IRS-aided channels.
//! * [`fedavg`]: a linear-regression federated averaging pipeline run over
//!   the simulated AirComp uplink.

pub mod channel;
pub mod coordination;
pub mod error;
pub mod fedavg;
pub mod irs;
pub mod numerics;
pub mod scheduler;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use numerics::ComplexMatrix;

/// Converts a value in decibels to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
