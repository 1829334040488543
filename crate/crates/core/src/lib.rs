//! Nonlinear Gibbs measures on finite mode truncations and the grand-canonical
//! bosonic Gibbs states whose rescaled density matrices converge to them.
//!
//! The crate is organized bottom-up:
//!
//! * [`spectral`] discretizes the one-body operator `h`, diagonalizes it and
//!   evaluates two-body matrix elements of the pair potential `w`;
//! * [`classical`] samples the Gaussian measure `μ₀`, reweights it into the
//!   interacting measure `μ` and estimates `Z_r` and the moments `γ^(k)`;
//! * [`fock`] builds the truncated Fock space, `ℍ_λ`, Gibbs states, reduced
//!   density matrices and relative entropies;
//! * [`semiclassics`] provides coherent states, trial states, Husimi densities
//!   and the Berezin–Lieb gap;
//! * [`experiment`] runs the high-temperature limit experiments and writes reports.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod semiclassics;
pub mod spectral;
pub mod symmetric;

pub use error::{Error, Result};
