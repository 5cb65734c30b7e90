//! Linearized block coordinate descent for composite problems
//! `min f(x) + h(F(x)) + Σ g_i(x^i)`.
//!
//! Each iteration picks a random block, linearizes `F` along it while keeping
//! the convex outer function `h` intact, and solves the resulting strongly
//! convex block subproblem. A doubling line search on the proximal weight `β`
//! enforces sufficient decrease, either against the current objective
//! ([`solver::Variant::Monotone`]) or against an averaged reference value
//! ([`solver::Variant::Nonmonotone`]).
//!
//! Modules:
//!
//! - [`problem`]: the problem trait, block partitions, evaluation cache, derivative checks
//! - [`prox`]: separable regularizers, proximal maps, subdifferential distances
//! - [`inner`]: accelerated proximal gradient for the block subproblem
//! - [`solver`]: the outer loops
//! - [`baselines`]: proximal coordinate descent and full Gauss–Newton
//! - [`penalty`]: quadratic penalty for equality constraints
//! - [`data`], [`classify`]: LIBSVM data and the two nonconvex classification losses
//! - [`bench`], [`cli`]: experiment sweeps, CSV traces, command line

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod classify;
pub mod cli;
pub mod data;
pub mod error;
pub mod inner;
pub mod penalty;
pub mod problem;
pub mod prox;
pub mod solver;

pub use error::{Error, Result};
