pub mod data;
pub mod density_ratio;
pub mod error;
pub mod fixtures;
pub mod fl;
pub mod made;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
