//! Finite-volume spectral shift functions for Schrödinger operators
//! `−½Δ + U + V` with periodic `U` and compactly supported `V`.
//!
//! The crate discretizes the Dirichlet operators on cubes, counts
//! eigenvalues by Sylvester inertia, builds `ξ_L = N₀ − N₁` and its energy
//! averages, and estimates the Laplace transform of `ξ` with Brownian-bridge
//! Monte Carlo.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge_mc;
pub mod eigencount;
pub mod error;
pub mod laplace_convergence;
pub mod lattice;
pub mod quadrature;
pub mod ssf;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
