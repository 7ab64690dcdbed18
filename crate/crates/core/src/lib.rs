//! Matrix-weighted sparse domination lab.
//!
//! Finite dyadic models of matrix weights, convex body averages and singular
//! integrals, together with a constructive sparse domination engine and
//! numerical certificates for the associated weighted estimates.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod convex;
pub mod error;
pub mod flow;
pub mod grid;
pub mod io;
pub mod operators;
pub mod report;
pub mod scalar;
pub mod sparse;
pub mod spd;
pub mod sum;
pub mod verify;
pub mod weights;

#[cfg(test)]
mod properties;

pub use error::{LabError, Result};
pub use grid::{CellBox, DyadicCube, GridFunction, GridGeometry, ScalarGridFunction};
pub use spd::{Mat, SpdMatrix};
