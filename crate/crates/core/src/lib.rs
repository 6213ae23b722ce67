pub mod encode;
pub mod error;
pub mod explain;
pub mod harness;
pub mod hmil;
pub mod ranking;
pub mod sample;
pub mod schema;
pub mod synthgen;
pub mod value;

pub use error::{Error, Result};
