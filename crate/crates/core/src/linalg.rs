//! Small dense helpers shared by the subspace and solver modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Above this dimension the spectral norm switches from a full SVD to power iteration.
const SVD_DIM_LIMIT: usize = 64;

/// Relative rank tolerance used when orthonormalizing spanning sets.
pub(crate) const RANK_TOL: f64 = 1e-12;

/// Largest singular value of `m`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows().max(m.ncols()) <= SVD_DIM_LIMIT {
        m.clone()
            .svd(false, false)
            .singular_values
            .iter()
            .fold(0.0_f64, |a, &s| a.max(s))
    } else {
        power_iteration_norm(m)
    }
}

fn power_iteration_norm(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    let n = gram.ncols();
    // deterministic start with no zero components
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_7).fract());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let w = &gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= 1e-15 * next.abs().max(1.0) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}

/// Ratio of extreme singular values; `f64::INFINITY` for singular matrices.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    let min = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Orthonormal basis of the column space of `m`, or `None` if `m` is rank deficient.
///
/// Householder QR; a column whose `R` diagonal falls below `RANK_TOL` times the
/// largest column norm counts as dependent.
pub fn orthonormalize(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    if cols == 0 || cols > rows {
        return None;
    }
    let scale = m.column_iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let qr = m.clone().qr();
    let r = qr.r();
    if (0..cols).any(|i| r[(i, i)].abs() <= RANK_TOL * scale) {
        return None;
    }
    Some(qr.q())
}

/// Orthonormal basis of the orthogonal complement of the span of the orthonormal columns of `basis`.
pub fn orthogonal_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    let d = basis.ncols();
    let residual = DMatrix::<f64>::identity(n, n) - basis * basis.transpose();
    let eig = SymmetricEigen::new(residual);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let keep = n - d;
    let mut out = DMatrix::zeros(n, keep);
    for (j, &idx) in order.iter().take(keep).enumerate() {
        out.set_column(j, &eig.eigenvectors.column(idx));
    }
    out
}

/// Stacks matrices with equal column counts on top of each other.
pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack: column mismatch");
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Max-abs entrywise distance.
pub(crate) fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_agrees_with_svd() {
        let m = DMatrix::from_fn(70, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let svd = m
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .fold(0.0_f64, |a, &s| a.max(s));
        assert!((spectral_norm(&m) - svd).abs() <= 1e-8 * svd);
    }

    #[test]
    fn complement_is_orthogonal() {
        let b = orthonormalize(&DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 0.0])).unwrap();
        let c = orthogonal_complement(&b);
        assert_eq!(c.shape(), (3, 2));
        assert!((b.transpose() * &c).norm() < 1e-12);
        assert!((c.transpose() * &c - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_input_is_rejected() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 0.0, 0.0]);
        assert!(orthonormalize(&m).is_none());
        assert_eq!(condition_number(&DMatrix::zeros(2, 2)), f64::INFINITY);
    }
}
