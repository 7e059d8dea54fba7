pub mod baselines;
pub mod benchmark;
pub mod ci_test;
pub mod cli;
pub mod data;
pub mod discovery;
pub mod error;
pub mod graph;
pub mod imputation;
pub mod learners;
pub mod permutation;
pub mod rng;
pub mod stats;
