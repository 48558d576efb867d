//! Semiparametric models of eye movements during reading, and reader
//! identification built on top of them.
//!
//! Every density in a reader model is a gamma distribution in natural-parameter
//! form multiplied by `exp(g)`, where `g` carries a Gaussian-process prior, and
//! the product is renormalized on a trapezoid quadrature grid. Densities are
//! fitted with a Metropolis-Hastings sampler; readers are identified by the
//! likelihood of held-out scanpaths under the posterior-mean model.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, parallel
//! orchestration and the command line live in the `gazeprint` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod corpus;
pub mod density;
pub mod error;
pub mod gamma;
pub mod gp;
pub mod identify;
pub mod linalg;
pub mod reader;
pub mod rng;
pub mod sampler;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
