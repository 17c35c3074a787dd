//! Exact simulation and analysis of superposed quantum error mitigation.
//!
//! The crate models the scheme in which a noisy computation `U` is applied
//! coherently across an input register and one or more auxiliary registers,
//! routed by controlled-SWAP operations. Measuring the control and auxiliary
//! registers makes the noise interfere, and post-selection (or outcome-wise
//! unitary correction) raises the fidelity of the surviving output above the
//! incoherent application of `U`.
//!
//! Layout:
//!
//! - [`linalg`]: dense complex matrices, Hermitian eigenvalues.
//! - [`gates`]: fixed gate matrices and Pauli-string enumeration.
//! - [`qstate`]: pure states, density matrices, registers, measurements.
//! - [`channels`]: Kraus channels, standard noise families, no-error weight.
//! - [`protocol`]: the superposition protocol itself: a brute-force engine,
//!   closed-form engines, overlap metrics, and figures of merit.
//! - [`corrector`]: derivative-free search for outcome-wise corrections
//!   (the quasi-deterministic variant).
//! - [`compiler`]: gate-level circuits with attached noise, the noisy
//!   controlled-SWAP decomposition, and the layered benchmark unitary.
//! - [`random`]: seeded generators for states, unitaries, and channels.

pub mod channels;
pub mod compiler;
pub mod corrector;
mod error;
pub mod gates;
pub mod linalg;
pub mod protocol;
pub mod qstate;
pub mod random;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
