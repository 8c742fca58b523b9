//! Core of the simworks user-simulation workbench: canonical encoding,
//! pipeline model, environment templates, component registry, experiment
//! bundles, the simulation engine and the run executor.

pub mod bundle;
pub mod canonical;
pub mod catalog;
pub mod dataset;
pub mod engine;
pub mod executor;
pub mod fsutil;
pub mod model;
pub mod registry;
pub mod search;
pub mod templates;
pub mod workspace;

/// Version string of this engine; bundles and templates must match it to run.
pub const ENGINE_VERSION: &str = "ref/0.1";
