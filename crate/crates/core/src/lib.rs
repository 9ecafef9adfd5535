//! Genetic-programming symbolic regression for estimating gas-turbine shaft
//! torque and fuel flow on the CODLAG propulsion dataset.

pub mod cli;
pub mod data;
pub mod evolve;
pub mod init;
pub mod kv;
pub mod metrics;
pub mod primitives;
pub mod search;
pub mod tree;

pub use evolve::{run, RunConfig, RunResult};
pub use tree::{parse_text, SyntaxTree};
