//! Boundary-value problems for the λ-Laplacian of finite absorbing Markov
//! chains: Dirichlet and Riquier (polyharmonic) problems, global
//! λ-polyharmonic functions through Jordan chains, Martin kernels, closed
//! forms on forward-only trees, and Monte Carlo cross-checks.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the reference double precision.
//!
//! ```
//! use polyharmonic::{samples::four_path, solve_dirichlet, Complex64};
//!
//! let chain = four_path::<f64>();
//! let g = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
//! let h = solve_dirichlet(&chain, Complex64::new(1.0, 0.0), &g).unwrap();
//! assert!((h.values[1].re - 2.0 / 3.0).abs() < 1e-12);
//! ```

pub mod binomial;
pub mod bvp;
pub mod chain;
pub mod error;
pub mod formats;
pub mod linalg;
pub mod martin;
pub mod mc;
pub mod samples;
pub mod scalar;
pub mod spectral;
pub mod tree;

pub use num_complex::{Complex, Complex32, Complex64};

pub use bvp::{
    free_polyharmonic_space, green, laplacian, polyharmonic_residual, solve_dirichlet, solve_riquier, GreenMatrix,
    RiquierProblem, Solution,
};
pub use chain::{Chain, Network};
pub use error::{Error, Result};
pub use martin::{derivative_identity_check, martin_kernel, riquier_via_kernels, MartinKernel};
pub use mc::{compare_to_analytic, simulate_hitting, HittingEstimate, SimConfig};
pub use scalar::Real;
pub use spectral::{global_polyharmonic_basis, interior_spectrum, jordan_basis, network_spectrum_check, JordanBasis};
pub use tree::{
    eval_polyharmonic, infinite_kernel_ktr, kernel_consistency_check, restrict_to_section, tree_green,
    tree_kernel_kr, BoundaryDistribution, ForwardTree, Section,
};

pub type Chain64 = Chain<f64>;
pub type Chain32 = Chain<f32>;
pub type ComplexMatrix = linalg::Matrix<f64>;
pub type ComplexVector = linalg::CVector<f64>;
pub type Tree64 = ForwardTree<f64>;
