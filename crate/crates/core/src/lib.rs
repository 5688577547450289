pub mod error;
pub mod fgraph;
pub mod fixtures;
pub mod model;
pub mod oracle;
pub mod spatial;
pub mod transcribe;

pub use error::{Error, Result};
