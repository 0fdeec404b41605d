//! Dense complex linear algebra: LU solves, rank-revealing kernels,
//! characteristic polynomials and eigenvalues of small matrices.

pub mod eigen;
pub mod lu;
pub mod matrix;
pub mod nullspace;
pub mod poly;

pub use eigen::{eigenvalues, eigenvalues_with, EigenConfig, Spectrum};
pub use lu::{lu_solve, Lu, LuSolution};
pub use matrix::{dot, norm2, vec_max_abs, CVector, Matrix};
pub use nullspace::{kernel, nullspace, orthonormalize, rank_of, Kernel};
