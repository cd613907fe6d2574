//! Scenario files for the `geotransfer` binary.

pub mod runner;
pub mod scenario;

pub use runner::{run, Status, TaskReport};
pub use scenario::{builtin_fixtures, Scenario, ScenarioError};
