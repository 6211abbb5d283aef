//! Executable toolkit for the Solvability Complexity Index (SCI).
//!
//! The crate has two halves that meet in the middle:
//!
//! * a concrete tower of algorithms that computes Koopman approximate-point
//!   pseudospectra of circle maps from finitely many point evaluations
//!   ([`dynamics`], [`quadrature`], [`koopman`], [`hyperspace`]), and
//! * the computability-model primitives the towers live in: Baire-space
//!   limits ([`baire`]), finite SCI problems with consistency and
//!   factorization checks ([`framework`]), and exact-rational oracle
//!   machines with an alternative finite-precision branch semantics
//!   ([`machine`]).
//!
//! Everything is finite and deterministic: limits are reported as budgeted
//! stage verdicts, never decided; randomized checks take explicit seeds.

pub mod baire;
pub mod dynamics;
pub mod framework;
pub mod guide;
pub mod hyperspace;
pub mod koopman;
pub mod machine;
pub mod quadrature;

// Numeric foundations callers need to construct inputs.
pub use num_bigint;
pub use num_complex;
pub use num_rational;
