//! Matrix-free compression of operators into the strongly admissible uniform
//! block low-rank format `A ≈ U Ã V* + B`.
//!
//! The operator is only ever touched through products with `A` and `A*`.
//! Bases come from one of three sketching schemes (block nullification,
//! tagging, naive blocked range finding); the core `Ã` and the near-field
//! discrepancy `B` are then recovered either by direct probing (type A) or
//! from the original sketches through pseudoinverses (type B).

pub mod bases;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod reconstruction;
pub mod tagging;
pub mod tessellation;

pub use error::{Error, Result};
pub use linalg::{Matrix, RandomStream};
