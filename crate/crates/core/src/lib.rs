//! Phase-space toolkit for continuous-variable Gaussian states.
//!
//! Units are fixed once for the whole crate: quadratures q, p with [q, p] = i,
//! vacuum covariance ½·I, storage ordering (q1, p1, q2, p2, ...), and complex
//! amplitudes α = (q + ip)/√2.

// `!(x >= 0.0)` is how parameter checks reject NaN along with negatives
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod cli;
pub mod error;
pub mod nonlocality;
pub mod protocols;
pub mod random;
pub mod separability;
pub mod states;
pub mod symplectic;

pub use error::{Error, Result};
pub use states::{build, GaussianState, StateFamilySpec};
pub use symplectic::{Mat, SymplecticMatrix, Vector};
