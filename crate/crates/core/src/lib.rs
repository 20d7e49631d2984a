pub mod config;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod prox;
pub mod solver;
pub mod synthgen;
pub mod tensor;

pub use error::{CmtfError, Result};
