//! Multistate curve crossing in truncated linear potential grids.
//!
//! Two sets of parallel linear potentials, coupled only across the sets, are
//! solved two ways:
//!
//! * [`qda`]: the coupling matrix is decomposed by SVD ([`decouple`]), the
//!   small off-diagonal potentials of the decoupled representation are
//!   dropped, and the problem splits into independent two-state linear
//!   crossings solved with confluent hypergeometric functions ([`specfun`]).
//! * [`integrate`]: direct adaptive integration of the full coupled
//!   equations, used as ground truth.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decouple;
pub mod error;
pub mod integrate;
pub mod model;
pub mod parallel;
pub mod qda;
pub mod smatrix;
pub mod specfun;

pub use error::{Error, Result};
