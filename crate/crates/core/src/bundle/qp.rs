//! Small dense convex QPs over a simplex, a nonnegative orthant and free variables.
//!
//! All bundle subproblems and hull-membership tests reduce to
//!
//! ```text
//! minimize   ½ wᵀ Q w + cᵀ w
//! subject to w = (λ, μ, ν),  λ ∈ Δ_k,  μ ≥ 0,  ν free
//! ```
//!
//! with `Q` positive semidefinite. The solver is a primal active-set method:
//! each iteration minimizes over the current face (pseudo-inverse of the reduced
//! Hessian, or a zero-curvature descent ray when the face problem is unbounded
//! below in the working subspace), then ratio-tests against the bounds.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// KKT tolerance for releasing a bound from the working set.
const KKT_TOL: f64 = 1e-10;
const MAX_ITER: usize = 2000;

/// Block sizes of the variable vector `(λ, μ, ν)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Blocks {
    pub simplex: usize,
    pub nonneg: usize,
    pub free: usize,
}

impl Blocks {
    pub fn simplex(k: usize) -> Self {
        Self {
            simplex: k,
            nonneg: 0,
            free: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.simplex + self.nonneg + self.free
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn bounded(&self, i: usize) -> bool {
        i < self.simplex + self.nonneg
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub w: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

pub fn objective(q: &DMatrix<f64>, c: &DVector<f64>, w: &DVector<f64>) -> f64 {
    0.5 * w.dot(&(q * w)) + c.dot(w)
}

/// Solves the block-structured QP described in the module docs.
pub fn solve(q: &DMatrix<f64>, c: &DVector<f64>, blocks: Blocks) -> Result<QpSolution> {
    let nv = blocks.len();
    if blocks.simplex == 0 {
        return Err(Error::InvalidInput("QP needs at least one simplex variable".into()));
    }
    if q.nrows() != nv || q.ncols() != nv {
        return Err(Error::dims("qp::solve (Q)", nv, q.nrows()));
    }
    if c.len() != nv {
        return Err(Error::dims("qp::solve (c)", nv, c.len()));
    }
    if q.iter().chain(c.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("QP data must be finite".into()));
    }

    let k = blocks.simplex;
    let start = (0..k)
        .min_by(|&a, &b| {
            let fa = 0.5 * q[(a, a)] + c[a];
            let fb = 0.5 * q[(b, b)] + c[b];
            fa.total_cmp(&fb)
        })
        .unwrap_or(0);
    let mut w = DVector::zeros(nv);
    w[start] = 1.0;
    let mut fixed: Vec<bool> = (0..nv).map(|i| blocks.bounded(i) && i != start).collect();

    let mut iterations = 0;
    // set after a full unblocked step: the iterate minimizes over the current face
    let mut face_optimal = false;
    let mut released: Option<usize> = None;
    while iterations < MAX_ITER {
        iterations += 1;
        let grad = q * &w + c;
        let free: Vec<usize> = (0..nv).filter(|&i| !fixed[i]).collect();
        let step = if face_optimal {
            None
        } else {
            let step = face_step(q, &grad, &free, k);
            let step_scale = 1e-13 * (1.0 + w.amax());
            (step.ray || step.direction.amax() > step_scale).then_some(step)
        };

        let Some(step) = step else {
            face_optimal = false;
            // stationary on the face: check bound multipliers
            let lam_free: Vec<usize> = free.iter().copied().filter(|&i| i < k).collect();
            let g_free = lam_free.iter().map(|&i| grad[i]).sum::<f64>() / lam_free.len() as f64;
            let mut worst: Option<(usize, f64)> = None;
            for i in (0..nv).filter(|&i| fixed[i]) {
                let mult = if i < k { grad[i] - g_free } else { grad[i] };
                if mult < -KKT_TOL && worst.is_none_or(|(_, m)| mult < m) {
                    worst = Some((i, mult));
                }
            }
            match worst {
                Some((i, _)) => {
                    fixed[i] = false;
                    released = Some(i);
                }
                None => break,
            }
            continue;
        };

        let mut alpha = if step.ray { f64::INFINITY } else { 1.0 };
        let mut blocking = None;
        for &i in &free {
            if blocks.bounded(i) && step.direction[i] < 0.0 && Some(i) != released {
                let ratio = w[i] / -step.direction[i];
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        if !alpha.is_finite() {
            return Err(Error::UnboundedSubproblem);
        }
        released = None;
        w += alpha * &step.direction;
        match blocking {
            Some(b) => {
                w[b] = 0.0;
                fixed[b] = true;
            }
            None => face_optimal = !step.ray,
        }
        for i in 0..blocks.simplex + blocks.nonneg {
            if w[i] < 0.0 {
                w[i] = 0.0;
            }
        }
        let total: f64 = w.rows(0, k).sum();
        w.rows_mut(0, k).unscale_mut(total);
    }

    Ok(QpSolution {
        objective: objective(q, c, &w),
        kkt_residual: kkt_residual(q, c, &w, blocks),
        iterations,
        w,
    })
}

struct FaceStep {
    direction: DVector<f64>,
    /// zero-curvature descent ray (the face problem is unbounded along it)
    ray: bool,
}

fn face_step(q: &DMatrix<f64>, grad: &DVector<f64>, free: &[usize], k: usize) -> FaceStep {
    let nv = grad.len();
    let nf = free.len();
    let pivot = free.iter().position(|&i| i < k);
    // null-space basis of the simplex equality restricted to the free set
    let cols: Vec<usize> = (0..nf).filter(|&j| Some(j) != pivot).collect();
    let r = cols.len();
    let mut direction = DVector::zeros(nv);
    if r == 0 {
        return FaceStep {
            direction,
            ray: false,
        };
    }
    let mut basis = DMatrix::zeros(nv, r);
    for (col, &j) in cols.iter().enumerate() {
        let i = free[j];
        basis[(i, col)] = 1.0;
        if i < k {
            basis[(free[pivot.expect("simplex variable is free")], col)] = -1.0;
        }
    }
    let reduced = basis.transpose() * q * &basis;
    let rgrad = basis.transpose() * grad;
    let eig = SymmetricEigen::new(reduced);
    let max_eig = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let zero_tol = 1e-12 * max_eig.max(1e-300);
    let mut z = DVector::zeros(r);
    let mut null_part = DVector::zeros(r);
    for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(idx);
        let coeff = v.dot(&rgrad);
        if lam > zero_tol {
            z -= (coeff / lam) * v;
        } else {
            null_part += coeff * v;
        }
    }
    let ray = null_part.norm() > 1e-12 * (1.0 + rgrad.norm());
    if ray {
        z = -null_part;
    }
    direction = basis * z;
    FaceStep { direction, ray }
}

/// Absolute KKT violation of `w` for the block problem.
pub fn kkt_residual(q: &DMatrix<f64>, c: &DVector<f64>, w: &DVector<f64>, blocks: Blocks) -> f64 {
    let grad = q * w + c;
    let k = blocks.simplex;
    let gmin = (0..k).map(|i| grad[i]).fold(f64::INFINITY, f64::min);
    let mut res: f64 = (0..k).map(|i| w[i] * (grad[i] - gmin)).sum();
    for i in k..k + blocks.nonneg {
        res = res.max((-grad[i]).max(0.0)).max((w[i] * grad[i]).abs());
    }
    for i in k + blocks.nonneg..blocks.len() {
        res = res.max(grad[i].abs());
    }
    let infeas = (w.rows(0, k).sum() - 1.0)
        .abs()
        .max((0..k + blocks.nonneg).map(|i| (-w[i]).max(0.0)).fold(0.0, f64::max));
    res.max(infeas)
}

/// Result of the proximal-bundle dual subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexQpSolution {
    pub lambda: Vec<f64>,
    pub d: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
}

/// `min_{λ ∈ Δ_k} (t/2)‖Gλ‖² + αᵀλ`, with trial step `d = −t G λ`.
///
/// `g` holds one bundle gradient per column.
pub fn simplex_qp(g: &DMatrix<f64>, alpha: &[f64], t: f64) -> Result<SimplexQpSolution> {
    let k = g.ncols();
    if k == 0 {
        return Err(Error::InvalidInput("empty bundle".into()));
    }
    if alpha.len() != k {
        return Err(Error::dims("simplex_qp (alpha)", k, alpha.len()));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("prox parameter must be positive, got {t}")));
    }
    let q = t * g.transpose() * g;
    let c = DVector::from_column_slice(alpha);
    let sol = solve(&q, &c, Blocks::simplex(k))?;
    let agg = g * &sol.w;
    Ok(SimplexQpSolution {
        d: (-t * agg).iter().copied().collect(),
        lambda: sol.w.iter().copied().collect(),
        objective: sol.objective,
        kkt_residual: sol.kkt_residual,
    })
}

/// Euclidean distance from `v` to the convex hull of `vertices`.
pub fn hull_distance(v: &[f64], vertices: &[Vec<f64>]) -> Result<f64> {
    if vertices.is_empty() {
        return Err(Error::EmptySample("hull vertices"));
    }
    let n = v.len();
    if let Some(bad) = vertices.iter().find(|p| p.len() != n) {
        return Err(Error::dims("hull_distance", n, bad.len()));
    }
    let g = DMatrix::from_fn(n, vertices.len(), |i, j| vertices[j][i] - v[i]);
    let sol = simplex_qp(&g, &vec![0.0; vertices.len()], 1.0)?;
    Ok((g * DVector::from_vec(sol.lambda)).norm())
}

/// Whether `v` lies within `tol` of the convex hull of `vertices`.
pub fn hull_membership(v: &[f64], vertices: &[Vec<f64>], tol: f64) -> Result<bool> {
    Ok(hull_distance(v, vertices)? <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_plane() {
        let g = DMatrix::from_row_slice(2, 1, &[3.0, -4.0]);
        let sol = simplex_qp(&g, &[0.7], 0.5).unwrap();
        assert_eq!(sol.lambda, vec![1.0]);
        assert_eq!(sol.d, vec![-1.5, 2.0]);
    }

    #[test]
    fn opposite_gradients_balance() {
        let g = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let sol = simplex_qp(&g, &[0.0, 0.0], 1.0).unwrap();
        assert!((sol.lambda[0] - 0.5).abs() < 1e-12);
        assert!(sol.d[0].abs() < 1e-12);
        assert!(sol.kkt_residual < 1e-10);
    }

    #[test]
    fn large_error_deactivates_plane() {
        let g = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let sol = simplex_qp(&g, &[0.0, 10.0], 1.0).unwrap();
        assert_eq!(sol.lambda, vec![1.0, 0.0]);
        assert_eq!(sol.d, vec![-1.0]);
        // grid over the 1-simplex confirms the endpoint
        let best = (0..=10_000)
            .map(|i| {
                let s = i as f64 / 10_000.0;
                0.5 * (1.0 - 2.0 * s).powi(2) + 10.0 * s
            })
            .fold(f64::INFINITY, f64::min);
        assert!(sol.objective <= best + 1e-12);
    }

    #[test]
    fn hull_membership_examples() {
        let verts = vec![vec![-1.0], vec![1.0]];
        assert!(hull_membership(&[1.0], &verts, 1e-12).unwrap());
        assert!(hull_membership(&[0.0], &verts, 1e-12).unwrap());
        assert!(!hull_membership(&[2.0], &verts, 1e-6).unwrap());
        assert!((hull_distance(&[2.0], &verts).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hull_distance_in_the_plane() {
        let square = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
        ];
        assert!((hull_distance(&[2.0, 0.5], &square).unwrap() - 1.0).abs() < 1e-12);
        assert!((hull_distance(&[2.0, 2.0], &square).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!(hull_distance(&[0.25, 0.75], &square).unwrap() < 1e-12);
    }

    #[test]
    fn nonnegative_and_free_blocks() {
        // min ½‖λ g + μ a‖² + s μ with g = (1, 1), a = (-1, 0): μ cancels the first coordinate
        let h = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, 0.0]);
        let q = h.transpose() * &h;
        let c = DVector::from_vec(vec![0.0, 0.0]);
        let blocks = Blocks {
            simplex: 1,
            nonneg: 1,
            free: 0,
        };
        let sol = solve(&q, &c, blocks).unwrap();
        assert!((sol.w[1] - 1.0).abs() < 1e-12);
        assert!((sol.objective - 0.5).abs() < 1e-12);

        // a free multiplier for an equality row (0, 1) removes the second coordinate too
        let h = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 1.0, 0.0, 1.0]);
        let q = h.transpose() * &h;
        let c = DVector::zeros(3);
        let sol = solve(
            &q,
            &c,
            Blocks {
                simplex: 1,
                nonneg: 1,
                free: 1,
            },
        )
        .unwrap();
        assert!(sol.objective.abs() < 1e-20);
        assert!((sol.w[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_degenerate_bundle_terminates() {
        let mut s = crate::sampling::Sampler::new(3, 4);
        let cols: Vec<Vec<f64>> = (0..50).map(|_| s.next_in_box(&[-3.0; 3], &[3.0; 3])).collect();
        let g = DMatrix::from_fn(2, 50, |i, j| cols[j][i]);
        let alpha: Vec<f64> = cols.iter().map(|c| 1e-6 * (c[2] + 3.0)).collect();
        let t = 512.0;
        let q = t * g.transpose() * &g;
        let sol = solve(&q, &DVector::from_column_slice(&alpha), Blocks::simplex(50)).unwrap();
        assert!(sol.iterations < 500, "{} iterations", sol.iterations);
        assert!(sol.kkt_residual <= 1e-10 * q.amax());
    }

    #[test]
    fn rejects_bad_input() {
        let g = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        assert!(simplex_qp(&g, &[0.0], 1.0).is_err());
        assert!(simplex_qp(&g, &[0.0, 0.0], 0.0).is_err());
        assert!(simplex_qp(&DMatrix::zeros(1, 0), &[], 1.0).is_err());
    }
}
