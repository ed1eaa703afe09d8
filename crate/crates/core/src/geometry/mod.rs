//! Unit-disk meshes, nodal coefficient fields, diffeomorphisms and
//! pushforwards.

pub mod diffeo;
pub mod fields;
pub mod io;
pub mod mesh;
pub mod pushforward;

pub use diffeo::{
    disk_sample_grid, make_bump_diffeo, BumpDiffeo, Compose, DiffeoRef, Diffeomorphism, Identity,
};
pub use fields::{CoefficientTriple, ScalarField, ScalarFn, TensorField, TensorFn};
pub use mesh::{build_disk_mesh, Mesh, Point2, PointLocator, TriangleGeometry};
pub use pushforward::{
    push_tensor_value, pushforward_kappa, pushforward_kappa_fn, pushforward_source,
    pushforward_source_fn, pushforward_tensor, pushforward_tensor_fn, pushforward_triple,
};
