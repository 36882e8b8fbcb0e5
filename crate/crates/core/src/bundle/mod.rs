//! Proximal bundle solver with trust-region style control of the prox parameter.
//!
//! The solver only needs an oracle returning `θ(x)` and one element of a
//! semismooth derivative at `x`; it never asks for Clarke subgradients.

pub mod qp;
mod solver;

pub use qp::{hull_distance, hull_membership, simplex_qp, SimplexQpSolution};
pub use solver::{
    solve, stationarity_certificate, Cut, IterationRecord, Oracle, OraclePoint, Polyhedron,
    SolveOptions, SolveReport, SolveStatus, StepKind,
};
