pub mod analysis;
pub mod annotation;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod neural;
pub mod sampling;
pub mod seed;
pub mod text;
pub mod topics;

pub use error::{Error, Result};
