//! Command line, file formats and network clients for the
//! function-interpretation benchmark built on `findbench-core`.

pub mod agent;
pub mod cli;
pub mod config;
pub mod data;
pub mod dataset;
pub mod evaluate;
pub mod generate;
pub mod interpret;

pub use dataset::Dataset;
