pub mod error;
pub mod estimate;
pub mod family;
pub mod learn;
pub mod pauli;
pub mod polysys;
pub mod sim;
pub mod solve;

pub use error::{Error, Result};
