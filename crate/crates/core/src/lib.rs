//! Numerics for absolutely minimizing Lipschitz extensions and viscosity
//! solutions of subelliptic infinity-Laplace and Aronsson equations.
//!
//! The crate is `no_std` with `alloc`. It covers three geometries
//! (Euclidean space, the Heisenberg group `H¹` and the Grushin plane) and
//! provides:
//!
//! * [`carnot`]: group law, gauge norm and horizontal frames;
//! * [`fields`]: lattice domains and horizontal finite differences;
//! * [`ccmetric`]: graph approximations of the Carnot–Carathéodory distance;
//! * [`convolution`]: sup/inf convolution with the gauge kernel;
//! * [`solver`]: `L^k` energy minimization and the `k → ∞` limit;
//! * [`verify`]: empirical checks of ellipticity, viscosity inequalities,
//!   comparison and the AMLE property.
#![no_std]

extern crate alloc;

pub mod carnot;
pub mod ccmetric;
pub mod convolution;
pub mod error;
pub mod fields;
mod math;
pub mod solver;
pub mod verify;

pub use carnot::{GroupSpec, HorizontalFrame, Point};
pub use error::{Error, Result};
pub use fields::{GridDomain, HorizontalField, Integrand, NodeKind, ScalarField, SymMatrix, SymMatrixField};
