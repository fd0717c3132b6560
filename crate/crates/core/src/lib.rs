pub mod constructions;
pub mod curvature;
pub mod error;
mod exec;
pub mod gh;
pub mod grid;
pub mod oracle;
pub mod profiles;
pub mod quad;
pub mod spaces;

pub use error::{Error, Result};
pub use grid::Grid;
