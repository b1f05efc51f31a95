pub mod analytics;
pub mod claims;
pub mod cli_io;
pub mod deviations;
pub mod error;
pub mod kernel;
pub mod microstructure;
pub mod ruin;
pub mod simulate;
pub mod stats;
