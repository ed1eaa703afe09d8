//! Numerical laboratory for the coupled conductivity/heat forward model.
//!
//! The crate covers P1 finite elements on the unit disk for the
//! conductivity and heat equations, the voltage-to-heat-flow measurement
//! map, coefficient pushforwards under boundary-fixing diffeomorphisms,
//! spectral Cauchy transforms with complex geometrical optics solutions,
//! and density probes for products of gradients.

pub mod cgo;
pub mod coefficients;
pub mod density;
pub mod elliptic;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod heat;
pub mod jet;
pub mod linalg;
pub mod measurement;
pub mod special;

pub use error::{Error, Result};
