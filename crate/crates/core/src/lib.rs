pub mod agents;
pub mod data;
pub mod dynamics;
pub mod error;
pub mod forecast;
pub mod harness;
pub mod nn;

pub use error::{Error, Result};
