//! Reverse augmented constraint preconditioning for sparse saddle-point
//! systems arising from Lagrange-multiplier contact discretizations.

pub mod dense;
pub mod augmentation;
pub mod error;
pub mod inner;
pub mod krylov;
pub mod mtx;
pub mod operator;
pub mod partition;
pub mod precond;
pub mod problem;
pub mod sparse;
pub mod spectral;
pub mod vector;

pub use dense::{dense_eigensolve, spectral_norm_2, DenseMatrix};
pub use error::{Error, Result};
pub use operator::LinearOperator;
pub use problem::SaddleSystem;
pub use sparse::SparseMatrix;
pub use vector::Vector;
