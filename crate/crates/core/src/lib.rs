pub mod error;
pub mod cli;
pub mod exact;
pub mod harness;
pub mod model;
pub mod schemes;
pub mod solvers;
pub mod stability;
pub mod stencils;
pub mod stochastic;

pub use error::{Error, Result};
