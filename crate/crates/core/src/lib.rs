//! Bayesian panel vector autoregressions with an exchangeable (partially
//! pooled) coefficient prior, structural identification by sign and zero
//! restrictions, and impulse-response, variance-decomposition and
//! historical-decomposition analysis.

pub mod analyze;
pub mod checkpoint;
pub mod error;
pub mod identify;
pub mod linalg;
pub mod model;
pub mod prior;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use model::{CountryData, CountryParams, Deterministic, Design, ModelSpec, Month, PanelDataset, Pooling, PosteriorDraw};
pub use sampler::{run_gibbs, ChainConfig, ChainTrace, GibbsDiagnostics, GibbsOutput, GibbsSampler};
