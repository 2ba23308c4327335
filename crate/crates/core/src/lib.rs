pub mod determinization;
pub mod dynamics;
pub mod entropy_det;
pub mod entropy_unc;
pub mod error;
pub mod geometry;
pub mod interval;
pub mod oracle;
pub mod pipeline;
pub mod synthesis;
pub mod systems;

pub use error::{Error, Result};
