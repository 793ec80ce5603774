//! Execute two-party quantum circuits as purely local simulations joined by
//! classical data.
//!
//! The crate covers the whole pipeline: a dense simulator ([`qsim`]), the
//! partitioned circuit model ([`circuit`]), signed product decompositions of
//! entangled states ([`forging`]), forged and gate teleportation
//! ([`teleport`]), identity-channel wire cuts with exact recombination
//! ([`wirecut`]), signed Monte Carlo estimation ([`sampler`]), readout error
//! mitigation ([`mitigation`]) and a worker/coordinator harness that only
//! exchanges classical messages ([`distrib`]).

pub mod circuit;
pub mod distrib;
pub mod error;
pub mod forging;
pub mod mitigation;
pub mod qsim;
pub mod sampler;
pub mod teleport;
pub mod wirecut;

pub use error::{Error, Result};
