//! Artificial neural networks whose neurons are quantum particles in
//! double-well potentials, sampled with path-integral Monte Carlo.

pub mod error;
pub mod experiments;
pub mod lattice;
pub mod network;
pub mod potentials;
pub mod sampler;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};
