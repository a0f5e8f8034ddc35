// SPDX-License-Identifier: Apache-2.0

//! Numerics for the family of quadratic Dirichlet L-functions `L(s, chi_d)`
//! with `d = 8m`, `m` odd and squarefree.
//!
//! The crate evaluates `L`, `L'` and `-L'/L` to double precision through an
//! incomplete-gamma approximate functional equation, counts and certifies
//! real zeros of `L'`, samples the random multiplicative model that predicts
//! the value distribution of `-L'/L`, and runs family-level experiments
//! (moments, discrepancy, zero statistics).
//!
//! Family sweeps are data parallel over discriminants. With the default
//! `parallel` feature the sweeps run on rayon; without it they fall back to
//! plain sequential iteration. Results are identical either way.

pub mod characters;
pub mod error;
pub mod fekete;
pub mod harness;
pub mod jet;
pub mod lfunc;
pub mod par;
pub mod primes;
pub mod quad;
pub mod randmodel;
pub mod selberg;
pub mod special;
pub mod stats;
pub mod zeros;

pub use characters::{enumerate_family, kronecker, Family, FundamentalDiscriminant};
pub use error::{Error, Result};
pub use lfunc::{EngineConfig, LEngine};
