pub mod bco;
pub mod checks;
pub mod config;
pub mod control;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod losses;
pub mod output;
pub mod rng;

pub use error::{Error, Result};
