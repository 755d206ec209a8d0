//! Spectral experiments on uniformly random d-regular graphs.

pub mod config;
pub mod error;
pub mod experiments;
pub mod format;
pub mod graph;
pub mod greens;
pub mod km;
pub mod quad;
pub mod report;
pub mod resampling;
pub mod seeding;
pub mod stats;

pub use error::{GraphError, NumericError, ResamplingError};
pub use graph::{Adjacency, Graph, RegularGraph, Subgraph, UniformSampler, Vertex};
pub use km::{LawParams, SpectralPoint};
