//! Numerical toolkit for Lévy-operator Hamiltonians, their convex conjugates,
//! large-deviations rate functions, and the exponential error made when a
//! nonlocal parabolic equation on the whole space is truncated to a ball.
//!
//! Module map:
//! - [`kernel`]: Lévy densities, tail classes, structural checks.
//! - [`hamiltonian`]: `H`, `H^ess` and derivatives by adaptive quadrature.
//! - [`legendre`]: Lagrangians `L = H*`, the K-transform and its inverse.
//! - [`rate`]: rate function, Lax-Oleinik formula, predicted exponents.
//! - [`hj`]: monotone schemes for the limiting Hamilton-Jacobi problem.
//! - [`pde`]: explicit simulation of the nonlocal equation and R-sweeps.
//! - [`table`]: CSV tables with 12-significant-digit output.
//! - [`cli`]: command-line plumbing and plot scripts.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod hamiltonian;
pub mod hj;
pub mod kernel;
pub mod legendre;
pub mod pde;
pub mod quadrature;
pub mod rate;
pub mod table;

pub use error::{Error, Result};
pub use hamiltonian::{
    ConvexHamiltonian, HamiltonianParams, QuadraticHamiltonian, QuadratureConfig,
};
pub use kernel::{build_kernel, Kernel, KernelSpec, Tail};
