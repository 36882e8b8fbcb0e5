//! Semismooth derivatives, SC derivatives of set-valued maps and a bundle solver.
//!
//! The crate is organized bottom-up:
//!
//! - [`subspace`]: subspaces of `R^{n+m}`, their metric, adjoints and regular representations.
//! - [`ssderiv`]: finite set-valued derivative maps with chain, sum and row-assembly rules.
//! - [`scdmap`]: SCD mappings and the derivative oracles of solution selections.
//! - [`bundle`]: the simplex QP, hull membership and the proximal bundle solver.
//! - [`verify`]: sampled certification of semismoothness and related properties.
//! - [`problems`]: built-in problems, including a nonsmooth bilevel example.

pub mod bundle;
pub mod error;
pub mod linalg;
pub mod problems;
pub mod sampling;
pub mod scdmap;
pub mod ssderiv;
pub mod subspace;
pub mod verify;

pub use error::{Error, Result};
