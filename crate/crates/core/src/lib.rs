//! Heat transmission across prefractal interfaces.
//!
//! The crate builds two-sided domains split by polygonal (prefractal)
//! interfaces, equips the interface with segment-wise measures, discretizes
//! the transmission problem with doubled interface nodes, and evaluates the
//! time-integrated energy functional used for convergence and shape studies.

pub mod energy;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod geometry;
pub mod linalg;
pub mod measure;
pub mod mesh;
pub mod optimize;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
