//! Dual-scaling interior-point solver for semidefinite programs.
//!
//! Problems are `min <C, X>` subject to `A X = b`, `X` positive semidefinite,
//! over a product of dense SDP blocks and one optional diagonal (LP) block.
//! [`solver::solve`] starts from an infeasible point through a homogeneous
//! self-dual embedding, switches to feasible dual-scaling iterations once the
//! dual residual vanishes, and returns a [`solver::SolveResult`] with a
//! recovered primal matrix and the six DIMACS error measures. Infeasible
//! problems end with a certificate status instead.
//!
//! The runnable programs under `examples/` walk through each capability.

// `!(x > 0.0)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod commands;
pub mod error;
pub mod generate;
pub mod kkt;
pub mod linalg;
pub mod model;
pub mod presolve;
pub mod recovery;
pub mod sdpa_io;
pub mod solver;
