//! Core numerics for pseudo-parabolic weighted total-variation flows on
//! intervals and rectangles with homogeneous Neumann boundary conditions.
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO. It provides:
//!
//! * [`grid`], [`field`], [`calculus`], [`norms`]: cell-centred grids and a
//!   discrete calculus in which the divergence is the exact negative adjoint
//!   of the gradient, so the discrete Green identity holds by construction.
//! * [`convex`]: the regularised length `γ_ε(y) = sqrt(ε² + |y|²)`, its
//!   gradient and Hessian, the set-valued `Sgn`, and the elliptic energies.
//! * [`elliptic`]: damped Newton with preconditioned conjugate-gradient inner
//!   solves for the strictly convex elliptic sub-problem and its biharmonic
//!   relaxation.
//! * [`flow`]: the implicit time-stepping scheme, time interpolants, and the
//!   ε-continuation that approximates the singular (ε = 0) flow.
//! * [`analysis`]: discrete energy ledgers, stability and embedding
//!   constants, Mosco probes, and convergence studies.
#![no_std]

extern crate alloc;

pub mod analysis;
pub mod calculus;
pub mod convex;
pub mod elliptic;
mod error;
pub mod field;
pub mod flow;
pub mod grid;
pub mod norms;

pub use error::{Error, Result};
pub use field::{ScalarField, VectorField};
pub use grid::Grid;
