//! Linear subspaces of `R^{n+m}` and the adjoint / regular-representation machinery.
//!
//! A [`Subspace`] is stored as an orthonormal basis. The metric between two
//! subspaces is the spectral norm of the difference of their orthogonal
//! projections. For `L ⊂ R^n × R^m` of dimension `n` the adjoint subspace is
//!
//! ```text
//! L* = { (-v*, u*) ∈ R^m × R^n : (u*, v*) ∈ L⊥ }
//! ```
//!
//! which has dimension `m`. Adjoint subspaces living in `R^m × R^n × R^m`
//! (coordinates `(z*, x*, y*)`) are *regular* when they can be written as
//! `rge(Z, X, I)`; [`regular_rep`] recovers `(Z, X)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, orthogonal_complement, orthonormalize, vstack};

/// Metric distance below which two subspaces are treated as equal.
pub const EQUALITY_TOL: f64 = 1e-8;

/// Bound on `1/σ_min` of the `y*`-block of an orthonormal basis; larger means not regular.
pub const REGULARITY_COND_LIMIT: f64 = 1e10;

/// Splitting of an ambient space `R^n × R^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Split {
    pub n: usize,
    pub m: usize,
}

impl Split {
    pub fn new(n: usize, m: usize) -> Self {
        Self { n, m }
    }

    pub fn ambient(&self) -> usize {
        self.n + self.m
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.m, self.n)
    }
}

#[derive(Debug, Clone)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Span of the columns of `spanning`, which must have full column rank.
    pub fn from_columns(spanning: &DMatrix<f64>) -> Result<Self> {
        orthonormalize(spanning)
            .map(|basis| Self { basis })
            .ok_or_else(|| Error::InvalidInput("spanning columns are rank deficient".into()))
    }

    /// Span of a list of vectors.
    pub fn span(vectors: &[&[f64]]) -> Result<Self> {
        let rows = vectors.first().map_or(0, |v| v.len());
        if let Some(bad) = vectors.iter().find(|v| v.len() != rows) {
            return Err(Error::dims("Subspace::span", rows, bad.len()));
        }
        let m = DMatrix::from_fn(rows, vectors.len(), |i, j| vectors[j][i]);
        Self::from_columns(&m)
    }

    /// Graph `{(u, A u) : u ∈ R^n}` of the `m×n` matrix `a`.
    pub fn from_graph(a: &DMatrix<f64>) -> Self {
        let n = a.ncols();
        let spanning = vstack(&[&DMatrix::identity(n, n), a]);
        Self::from_columns(&spanning).expect("graph of a finite matrix has full column rank")
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn projection(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Euclidean distance from `v` to the subspace.
    pub fn distance_to(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.ambient() {
            return Err(Error::dims("Subspace::distance_to", self.ambient(), v.len()));
        }
        let v = nalgebra::DVector::from_column_slice(v);
        let proj = &self.basis * (self.basis.transpose() * &v);
        Ok((v - proj).norm())
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> Result<bool> {
        let scale = linalg::norm(v).max(1.0);
        Ok(self.distance_to(v)? <= tol * scale)
    }

    pub fn approx_eq(&self, other: &Subspace) -> bool {
        self.dim() == other.dim()
            && metric(self, other).is_ok_and(|d| d <= EQUALITY_TOL)
    }

    /// Image of the subspace under an invertible linear map.
    pub fn transform(&self, map: &DMatrix<f64>) -> Result<Self> {
        if map.ncols() != self.ambient() {
            return Err(Error::dims("Subspace::transform", self.ambient(), map.ncols()));
        }
        Self::from_columns(&(map * &self.basis))
    }
}

/// `d(L1, L2) = ‖P1 − P2‖₂`.
pub fn metric(l1: &Subspace, l2: &Subspace) -> Result<f64> {
    if l1.ambient() != l2.ambient() {
        return Err(Error::dims("metric", l1.ambient(), l2.ambient()));
    }
    Ok(linalg::spectral_norm(&(l1.projection() - l2.projection())))
}

/// The adjoint subspace `L* ⊂ R^m × R^n` of an `n`-dimensional `L ⊂ R^n × R^m`.
pub fn adjoint(l: &Subspace, split: Split) -> Result<Subspace> {
    if l.ambient() != split.ambient() {
        return Err(Error::dims("adjoint (ambient)", split.ambient(), l.ambient()));
    }
    if l.dim() != split.n {
        return Err(Error::dims("adjoint (dimension)", split.n, l.dim()));
    }
    let (n, m) = (split.n, split.m);
    if m == 0 {
        return Err(Error::InvalidInput("adjoint of a full space is trivial".into()));
    }
    let perp = orthogonal_complement(l.basis());
    // (u*, v*) -> (-v*, u*); a signed row permutation keeps the basis orthonormal
    let mut basis = DMatrix::zeros(m + n, m);
    basis.view_mut((0, 0), (m, m)).copy_from(&(-perp.rows(n, m)));
    basis.view_mut((m, 0), (n, m)).copy_from(&perp.rows(0, n));
    Ok(Subspace { basis })
}

/// `(Z, X)` with `L* = rge(Z, X, I)` for an `m`-dimensional subspace of `R^m × R^n × R^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularAdjointRep {
    pub z: DMatrix<f64>,
    pub x: DMatrix<f64>,
}

impl RegularAdjointRep {
    /// `rge(Z, X, I)`.
    pub fn reconstruct(&self) -> Subspace {
        let m = self.z.ncols();
        Subspace::from_columns(&vstack(&[&self.z, &self.x, &DMatrix::identity(m, m)]))
            .expect("identity block gives full column rank")
    }

    /// `κ(L*) = ‖(Z; X)‖₂`.
    pub fn kappa(&self) -> f64 {
        kappa(self)
    }
}

/// Splits a basis of `L*` into `(B_z, B_x, B_y)` and forms `(B_z B_y⁻¹, B_x B_y⁻¹)`.
///
/// `layout` is the coordinate split `(m, n, m)` of `R^m × R^n × R^m`.
pub fn regular_rep(lstar: &Subspace, layout: (usize, usize, usize)) -> Result<RegularAdjointRep> {
    let (mz, n, my) = layout;
    if mz != my {
        return Err(Error::InvalidInput(format!(
            "regular representation needs equal z*/y* blocks, got ({mz}, {n}, {my})"
        )));
    }
    let m = mz;
    if lstar.ambient() != 2 * m + n {
        return Err(Error::dims("regular_rep (ambient)", 2 * m + n, lstar.ambient()));
    }
    if lstar.dim() != m {
        return Err(Error::dims("regular_rep (dimension)", m, lstar.dim()));
    }
    let b = lstar.basis();
    let by = b.rows(m + n, m).into_owned();
    // the basis is orthonormal, so 1/σ_min(B_y) is the condition relative to L*
    let smin = by.clone().svd(false, false).singular_values.min();
    let condition = if smin > 0.0 { 1.0 / smin } else { f64::INFINITY };
    if !(condition <= REGULARITY_COND_LIMIT) {
        return Err(Error::NotRegular { condition });
    }
    let by_inv = by
        .try_inverse()
        .ok_or(Error::NotRegular { condition: f64::INFINITY })?;
    Ok(RegularAdjointRep {
        z: b.rows(0, m) * &by_inv,
        x: b.rows(m, n) * &by_inv,
    })
}

pub fn kappa(rep: &RegularAdjointRep) -> f64 {
    linalg::spectral_norm(&vstack(&[&rep.z, &rep.x]))
}

/// `S = (0 −I_m; I_n 0)`, mapping `(u, v) ∈ R^n × R^m` to `(−v, u)`.
pub fn swap_matrix(split: Split) -> DMatrix<f64> {
    let (n, m) = (split.n, split.m);
    let mut s = DMatrix::zeros(m + n, n + m);
    for i in 0..m {
        s[(i, n + i)] = -1.0;
    }
    for i in 0..n {
        s[(m + i, i)] = 1.0;
    }
    s
}

/// `S M^T S^T` for a square `(n+m)×(n+m)` matrix `M`.
pub fn swap_transform(mat: &DMatrix<f64>, split: Split) -> Result<DMatrix<f64>> {
    let size = split.ambient();
    if mat.nrows() != size || mat.ncols() != size {
        return Err(Error::dims("swap_transform", size, mat.nrows().max(mat.ncols())));
    }
    let s = swap_matrix(split);
    Ok(&s * mat.transpose() * s.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(v: &[f64]) -> Subspace {
        Subspace::span(&[v]).unwrap()
    }

    #[test]
    fn graph_of_zero_and_identity() {
        let zero = Subspace::from_graph(&DMatrix::zeros(1, 1));
        assert!(zero.approx_eq(&line(&[1.0, 0.0])));
        let id = Subspace::from_graph(&DMatrix::identity(1, 1));
        assert!(id.approx_eq(&line(&[1.0, 1.0])));
        let b = id.basis();
        assert!((b[(0, 0)].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn graph_of_row_matrix_is_first_example_subspace() {
        // {(u, v, v - u)}
        let l1 = Subspace::from_graph(&DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]));
        let expected = Subspace::span(&[&[1.0, 0.0, -1.0], &[0.0, 1.0, 1.0]]).unwrap();
        assert!(l1.approx_eq(&expected));
    }

    #[test]
    fn metric_of_orthogonal_lines_is_one() {
        let d = metric(&line(&[1.0, 0.0]), &line(&[0.0, 1.0])).unwrap();
        assert!((d - 1.0).abs() < 1e-14);
        let l = line(&[0.3, -0.7]);
        assert!(metric(&l, &l).unwrap() < 1e-15);
    }

    #[test]
    fn metric_rejects_mismatched_ambient() {
        assert!(matches!(
            metric(&line(&[1.0, 0.0]), &line(&[1.0, 0.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn adjoint_matches_worked_examples() {
        let split = Split::new(2, 1);
        let l3 = Subspace::span(&[&[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]).unwrap();
        assert!(adjoint(&l3, split).unwrap().approx_eq(&line(&[0.0, -1.0, 1.0])));
        let l1 = Subspace::span(&[&[1.0, 0.0, -1.0], &[0.0, 1.0, 1.0]]).unwrap();
        assert!(adjoint(&l1, split).unwrap().approx_eq(&line(&[1.0, -1.0, 1.0])));
        let id = Subspace::from_graph(&DMatrix::identity(1, 1));
        assert!(adjoint(&id, Split::new(1, 1)).unwrap().approx_eq(&line(&[1.0, 1.0])));
    }

    #[test]
    fn adjoint_rejects_wrong_dimension() {
        let l = line(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            adjoint(&l, Split::new(2, 1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn regular_rep_examples() {
        let rep = regular_rep(&line(&[1.0, -1.0, 1.0]), (1, 1, 1)).unwrap();
        assert!((rep.z[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((rep.x[(0, 0)] + 1.0).abs() < 1e-12);
        let rep4 = regular_rep(&line(&[0.0, 0.0, 1.0]), (1, 1, 1)).unwrap();
        assert!(rep4.z[(0, 0)].abs() < 1e-14);
        assert!(rep4.x[(0, 0)].abs() < 1e-14);
        assert!(matches!(
            regular_rep(&line(&[1.0, 0.0, 0.0]), (1, 1, 1)),
            Err(Error::NotRegular { .. })
        ));
    }

    #[test]
    fn kappa_examples() {
        let rep = |z: f64, x: f64| RegularAdjointRep {
            z: DMatrix::from_element(1, 1, z),
            x: DMatrix::from_element(1, 1, x),
        };
        assert_eq!(kappa(&rep(0.0, 0.0)), 0.0);
        assert!((kappa(&rep(1.0, -1.0)) - 2f64.sqrt()).abs() < 1e-15);
        assert!((kappa(&rep(-1.0, 0.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn swap_transform_two_by_two() {
        let (a, b, c, d) = (1.0, 2.0, 3.0, 4.0);
        let m = DMatrix::from_row_slice(2, 2, &[a, b, c, d]);
        let t = swap_transform(&m, Split::new(1, 1)).unwrap();
        // hand expansion of S M^T S^T with S = [[0,-1],[1,0]]
        assert_eq!(t, DMatrix::from_row_slice(2, 2, &[d, -b, -c, a]));
        let id = DMatrix::identity(3, 3);
        assert_eq!(swap_transform(&id, Split::new(2, 1)).unwrap(), id);
        assert!(swap_transform(&id, Split::new(1, 1)).is_err());
    }

    #[test]
    fn swap_of_identity_chart_gives_transposed_graph() {
        let a = DMatrix::from_row_slice(2, 1, &[0.5, -2.0]);
        let split = Split::new(1, 2);
        let s = swap_transform(&DMatrix::identity(3, 3), split).unwrap();
        let via_swap = Subspace::from_graph(&a.transpose()).transform(&s).unwrap();
        let via_adjoint = adjoint(&Subspace::from_graph(&a), split).unwrap();
        assert!(via_swap.approx_eq(&via_adjoint));
    }
}
