pub mod circuit;
pub mod coupling;
pub mod disorder;
pub mod ed;
pub mod error;
pub mod geometry;
pub mod lindblad;
pub mod observables;
pub mod output;
pub mod runner;
pub mod spin;

pub use error::{Error, Result};
