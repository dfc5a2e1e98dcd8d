//! Cross-document event coreference with temporal commonsense inferences.

pub mod commonsense;
pub mod corpus;
pub mod embed;
pub mod error;
mod http;
pub mod cluster;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod scorer;
pub mod util;

pub use error::{Error, Result};
