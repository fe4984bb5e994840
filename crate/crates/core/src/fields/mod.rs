//! Lattice domains, grid fields and finite-difference horizontal calculus.

mod calculus;
mod field;
mod grid;
mod integrand;

pub use calculus::{
    adjoint_divergence, aronsson_residual, horizontal_gradient, horizontal_hessian,
    infinity_laplacian, AronssonResidual,
};
pub use field::{HorizontalField, ScalarField, SymMatrix, SymMatrixField};
pub use grid::{GridDomain, NodeKind};
pub(crate) use grid::increment;
pub(crate) use field::same_domain;
pub use integrand::Integrand;
