//! Variable-exponent Sobolev spaces on grids: modulars and norms, capacities,
//! perturbed p(x)-Laplacian Dirichlet problems and fine-topology diagnostics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod cells;
pub mod config;
pub mod dirichlet;
pub mod domain;
pub mod driver;
pub mod energy;
pub mod error;
pub mod exponent;
pub mod expr;
pub mod finetopo;
pub mod modular;
pub mod parallel;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
