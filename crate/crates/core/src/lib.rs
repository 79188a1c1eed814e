//! Minimum message length estimation and model selection for finite mixtures
//! of multivariate Gaussian and von Mises-Fisher distributions.
//!
//! Message lengths reported by the public API are in bits.

#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod gaussian;
pub mod mixture;
pub mod rng;
pub mod search;
pub mod special_functions;
pub mod vmf;

pub use data::{DataSet, WeightedSample};
pub use error::{Error, Result};

/// Converts nats to bits.
#[inline]
pub fn nats_to_bits(x: f64) -> f64 {
    x / core::f64::consts::LN_2
}

/// Lattice quantisation cost of `p` free parameters in nats, using the
/// cubic lattice constant `1/12`.
#[inline]
pub fn lattice_nats(p: usize) -> f64 {
    0.5 * p as f64 * (1.0 + libm::log(1.0 / 12.0))
}
