//! The generational loop: parsimony-penalized MAE fitness, tournament
//! selection, crossover and the three mutations, per-generation training
//! subsamples, and the two stopping rules.

mod config;
mod operators;
mod run;

pub use config::{ConfigError, RunConfig, DEFAULT_POINT_REPLACE_RATE};
pub use operators::{
    crossover, crossover_traced, hoist_mutation, penalized, point_mutation, subtree_mutation,
    tournament, CrossoverOutcome, Individual, MutationParams, Operator, CAP_RETRIES,
};
pub use run::{
    breed, draw_sample, evaluate, evolve_generation, pick_operator, run, run_with_features,
    GenerationStats, RunError, RunResult, Termination,
};
