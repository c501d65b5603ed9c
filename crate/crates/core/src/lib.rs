pub mod clickstream;
pub mod config;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod geo;
pub mod kg;
pub mod ltr;
pub mod pipeline;
pub mod seed;
pub mod synthetic;
pub mod tsv;

pub use error::{Error, ErrorClass, Result};
