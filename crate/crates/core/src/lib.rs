//! Discrete approximations of the full Brownian web.
//!
//! Coalescing random-walk webs on the even sublattice of `Z^2` and their
//! deterministic duals, full paths spliced from backward and forward pieces,
//! isotropic stochastic flows under diffusive rescaling, and closed-form
//! coalescing Brownian motion laws to test them against.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod discreteweb;
pub mod error;
pub mod fullweb;
pub mod pathspace;
pub mod rng;
pub mod stats;
pub mod stochflow;

pub use error::{Error, Result};
