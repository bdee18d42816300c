//! Benchmark problems, suite runner and profile computations.

pub mod generate;
pub mod library;
pub mod profile;
pub mod records;
pub mod runner;
pub mod suite;
