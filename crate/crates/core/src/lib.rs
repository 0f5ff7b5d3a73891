//! Certified isolation of zero clusters of square polynomial systems.

pub mod bounds;
pub mod certify;
pub mod error;
pub mod interval;
pub mod io;
pub mod numlinalg;
pub mod pipeline;
pub mod poly;
pub mod sos;

pub use error::{Error, Result};
