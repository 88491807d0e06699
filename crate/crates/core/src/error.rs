use std::path::PathBuf;

use thiserror::Error;

use crate::network::NeuronId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    Lattice(String),

    #[error("invalid kink schedule: {0}")]
    Schedule(String),

    #[error("path has {got} slices, lattice expects {expected}")]
    PathLength { expected: usize, got: usize },

    #[error("path contains a non-finite value at slice {0}")]
    NonFinite(usize),

    #[error("unknown neuron id {0}")]
    UnknownNeuron(NeuronId),

    #[error("neuron {0} is a fixed input and cannot be updated")]
    FixedNeuron(NeuronId),

    #[error("neuron {0} is simulated, not an input")]
    NotAnInput(NeuronId),

    #[error("brightness {0} outside [0, 1]")]
    Brightness(f64),

    #[error("state holds {got} paths, network has {expected} neurons")]
    StateShape { expected: usize, got: usize },

    #[error("network failed validation: {}", .0.join("; "))]
    InvalidNetwork(Vec<String>),

    #[error("reference path has zero integrated potential energy")]
    VacuumReference,

    #[error("no samples to average")]
    NoSamples,

    #[error("invalid sampler configuration: {0}")]
    SamplerConfig(String),

    #[error("action became non-finite during sampling (neuron {neuron}, slice {slice})")]
    NonFiniteAction { neuron: usize, slice: usize },

    #[error("invalid sweep plan: {0}")]
    SweepPlan(String),

    #[error("invalid input image: {0}")]
    Image(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("weight matrix is constant; cannot normalize")]
    ConstantWeights,

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path}: truncated payload, expected {expected} bytes, got {got}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        got: usize,
    },

    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("{path}: label {label} outside 0..=9")]
    BadLabel { path: PathBuf, label: u8 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
