//! Headless driver for demonstration scenarios.

pub mod scenario;
pub mod script;
pub mod synthetic;

pub use scenario::{execute, Execution, Report, RowResult, Scenario, ScenarioError, ScenarioRunner};
