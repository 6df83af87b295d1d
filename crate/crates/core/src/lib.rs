//! Agent-based simulator of gig-delivery platforms with experiment and analysis tooling.

pub mod agents;
pub mod analysis;
pub mod config;
pub mod error;
pub mod experiment;
pub mod export;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod orders;
pub mod rng;
pub mod sim;

pub use config::{load_config, RunConfig};
pub use error::{Error, Result};
pub use sim::{run, run_summary, RunSummary, RunTrace, World};
