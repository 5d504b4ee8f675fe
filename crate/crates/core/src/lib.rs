pub mod config;
pub mod custom;
pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod layout;
pub mod parallel;
pub mod scenarios;
pub mod superatom;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use parallel::Execution;
pub use scenarios::{run_batch, RunOptions, Scenario, ScenarioReport};
