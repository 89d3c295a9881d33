//! Degree-weighted DeGroot learning on stochastic block models: learning
//! matrices, their spectra, the Elite-Grassroots closed forms, and the Monte
//! Carlo studies built on them.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod netgen;
pub mod plot;
pub mod rng;
pub mod spectra;
pub mod weightfn;

pub use error::{Error, Result};
