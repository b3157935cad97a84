//! Numerical toolkit for wave equations with dynamic boundary conditions on a
//! domain with a convex hole: geometric certificates, Carleman weights, an
//! explicit solver, a discrete Carleman audit, inverse-source reconstruction
//! and observability/control experiments.

pub mod carleman;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod inverse;
pub mod linalg;
pub mod observability;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
