pub mod cramer_wold;
pub mod cwdae;
pub mod data;
mod error;
pub mod heads;
pub mod metrics;
pub mod numerics;
pub mod synthesis;

pub use error::{Error, Result};
