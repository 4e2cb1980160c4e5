pub mod cli;
mod codec;
pub mod continual;
pub mod data;
pub mod dsp;
pub mod error;
pub mod grad;
pub mod harness;
pub mod loss;
pub mod model;

pub use error::{Error, Result};
