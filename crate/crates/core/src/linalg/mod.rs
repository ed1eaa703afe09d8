//! Sparse storage, direct factorization and the generalized eigensolver.

pub mod cholesky;
pub mod eigen;
pub mod sparse;

pub use cholesky::EnvelopeCholesky;
pub use eigen::{smallest_eigenpairs, EigenPairs};
pub use sparse::{CsrMatrix, SubMatrix};
