//! Far-field synthesis, multi-frequency subspace migration and Newton shape
//! refinement for perfectly conducting cracks in the plane.
//!
//! The pipeline runs bottom-up through the modules:
//! [`geometry`] describes the cracks, [`forward`] solves the scattering
//! problem, [`msr`] assembles and decomposes response matrices, [`imaging`]
//! evaluates the migration functionals, [`analysis`] holds the closed-form
//! kernel predictions and [`refine`] performs Gauss–Newton refinement.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod imaging;
pub mod msr;
pub mod quad;
pub mod refine;
pub mod specfun;

pub use error::{Error, Result};

/// Planar point or vector.
pub type Vec2 = nalgebra::Vector2<f64>;
pub use num_complex::Complex64 as C64;
