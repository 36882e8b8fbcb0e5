//! Semismooth derivatives as finite set-valued matrix maps.
//!
//! An [`SSDerivative`] assigns to every point of its domain a finite, nonempty
//! [`MatrixSet`]. Continuum-valued derivatives are represented by their
//! extreme points; convex hulls and graph closures are only formed pointwise,
//! by sampling, in [`cocl_at`].

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::bundle::qp::hull_distance;
use crate::error::{Error, Result};
use crate::linalg::{max_abs_diff, spectral_norm};
use crate::sampling::{shell_points, DEFAULT_SEED};

/// Entrywise tolerance under which two matrices of a set are considered equal.
pub const DEDUP_TOL: f64 = 1e-12;

/// Number of halvings of the sampling radius used by [`cocl_at`] and [`bnd_at`].
pub const SHELLS: usize = 10;

pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type EvalFn = Arc<dyn Fn(&[f64]) -> Result<MatrixSet> + Send + Sync>;
type BoundFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A finite set of `rows × cols` matrices without (near-)duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSet {
    rows: usize,
    cols: usize,
    elements: Vec<DMatrix<f64>>,
}

impl MatrixSet {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            elements: Vec::new(),
        }
    }

    pub fn singleton(m: DMatrix<f64>) -> Self {
        let mut s = Self::new(m.nrows(), m.ncols());
        s.elements.push(m);
        s
    }

    pub fn from_elements<I>(rows: usize, cols: usize, elements: I) -> Result<Self>
    where
        I: IntoIterator<Item = DMatrix<f64>>,
    {
        let mut s = Self::new(rows, cols);
        for e in elements {
            s.insert(e)?;
        }
        Ok(s)
    }

    /// Scalars as a set of `1×1` matrices.
    pub fn scalars(values: &[f64]) -> Self {
        Self::from_elements(1, 1, values.iter().map(|&v| DMatrix::from_element(1, 1, v)))
            .expect("1x1 elements")
    }

    /// Row vectors as a set of `1×n` matrices.
    pub fn rows_of(n: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut s = Self::new(1, n);
        for r in rows {
            if r.len() != n {
                return Err(Error::dims("MatrixSet::rows_of", n, r.len()));
            }
            s.insert(DMatrix::from_row_slice(1, n, r))?;
        }
        Ok(s)
    }

    /// Adds `m` unless an entrywise-equal element is already present.
    pub fn insert(&mut self, m: DMatrix<f64>) -> Result<bool> {
        self.insert_with_tol(m, DEDUP_TOL)
    }

    fn insert_with_tol(&mut self, m: DMatrix<f64>, tol: f64) -> Result<bool> {
        if m.nrows() != self.rows || m.ncols() != self.cols {
            return Err(Error::dims(
                "MatrixSet::insert",
                self.rows * self.cols,
                m.nrows() * m.ncols(),
            ));
        }
        if self.elements.iter().any(|e| max_abs_diff(e, &m) <= tol) {
            return Ok(false);
        }
        self.elements.push(m);
        Ok(true)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DMatrix<f64>> {
        self.elements.iter()
    }

    pub fn elements(&self) -> &[DMatrix<f64>] {
        &self.elements
    }

    pub fn contains(&self, m: &DMatrix<f64>, tol: f64) -> bool {
        m.shape() == (self.rows, self.cols)
            && self.elements.iter().any(|e| max_abs_diff(e, m) <= tol)
    }

    /// Largest spectral norm among the elements.
    pub fn max_norm(&self) -> f64 {
        self.elements.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    /// Elements flattened row-major, for hull computations.
    pub fn flattened(&self) -> Vec<Vec<f64>> {
        self.elements
            .iter()
            .map(|e| e.transpose().iter().copied().collect())
            .collect()
    }

    /// Same set after merging elements closer than `tol`.
    pub fn merged(&self, tol: f64) -> Self {
        let mut out = Self::new(self.rows, self.cols);
        for e in &self.elements {
            let _ = out.insert_with_tol(e.clone(), tol);
        }
        out
    }
}

impl IntoIterator for MatrixSet {
    type Item = DMatrix<f64>;
    type IntoIter = std::vec::IntoIter<DMatrix<f64>>;

    fn into_iter(self) -> Self::IntoIter {
        self.elements.into_iter()
    }
}

/// Domain of a derivative map.
#[derive(Clone)]
pub enum Domain {
    All,
    /// Open box `lo < x < hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Predicate(Arc<dyn Fn(&[f64]) -> bool + Send + Sync>),
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::All => x.iter().all(|v| v.is_finite()),
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *l < *v && *v < *h),
            Domain::Predicate(p) => p(x),
        }
    }
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::All => write!(f, "All"),
            Domain::Box { lo, hi } => write!(f, "Box({lo:?}, {hi:?})"),
            Domain::Predicate(_) => write!(f, "Predicate"),
        }
    }
}

/// A map `x ↦ Ψ(x)` into finite sets of `rows × cols` matrices.
#[derive(Clone)]
pub struct SSDerivative {
    rows: usize,
    cols: usize,
    domain: Domain,
    eval: EvalFn,
    bound_hint: Option<BoundFn>,
}

impl fmt::Debug for SSDerivative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SSDerivative")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("domain", &self.domain)
            .field("bound_hint", &self.bound_hint.is_some())
            .finish()
    }
}

impl SSDerivative {
    pub fn new<F>(rows: usize, cols: usize, eval: F) -> Self
    where
        F: Fn(&[f64]) -> Result<MatrixSet> + Send + Sync + 'static,
    {
        Self {
            rows,
            cols,
            domain: Domain::All,
            eval: Arc::new(eval),
            bound_hint: None,
        }
    }

    /// Derivative defined by an infallible list of elements.
    pub fn from_fn<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    {
        Self::new(rows, cols, move |x| MatrixSet::from_elements(rows, cols, f(x)))
    }

    /// Scalar-valued function of `n` variables given by a list of gradient rows.
    pub fn from_rows<F>(n: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    {
        Self::new(1, n, move |x| MatrixSet::rows_of(n, &f(x)))
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        let set = MatrixSet::singleton(m.clone());
        Self::new(m.nrows(), m.ncols(), move |_| Ok(set.clone()))
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    /// Declares a local bound on the operator norms of the values near each point.
    pub fn with_bound_hint<F>(mut self, hint: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.bound_hint = Some(Arc::new(hint));
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn bound_hint(&self, x: &[f64]) -> Option<f64> {
        self.bound_hint.as_ref().map(|h| h(x))
    }

    pub fn eval(&self, x: &[f64]) -> Result<MatrixSet> {
        if x.len() != self.cols {
            return Err(Error::dims("SSDerivative::eval", self.cols, x.len()));
        }
        if !self.domain.contains(x) {
            return Err(Error::DomainViolation { point: x.to_vec() });
        }
        let set = (self.eval)(x)?;
        if set.rows() != self.rows || set.cols() != self.cols {
            return Err(Error::dims("SSDerivative value", self.rows * self.cols, set.rows() * set.cols()));
        }
        if set.is_empty() {
            return Err(Error::at(x, Error::EmptySample("derivative value")));
        }
        Ok(set)
    }

    /// `c·Ψ`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.clone();
        let (rows, cols) = (self.rows, self.cols);
        Self::new(rows, cols, move |x| {
            MatrixSet::from_elements(rows, cols, inner.eval(x)?.into_iter().map(|m| m * c))
        })
        .with_domain(self.domain.clone())
    }

    /// Row `i` of every element, i.e. the derivative of the `i`-th component.
    pub fn component(&self, i: usize) -> Result<Self> {
        if i >= self.rows {
            return Err(Error::dims("SSDerivative::component", self.rows, i + 1));
        }
        let inner = self.clone();
        let cols = self.cols;
        Ok(Self::new(1, cols, move |x| {
            MatrixSet::from_elements(1, cols, inner.eval(x)?.iter().map(|m| m.rows(i, 1).into_owned()))
        })
        .with_domain(self.domain.clone()))
    }
}

/// Chain rule: `Ψ(x) = { B A : A ∈ Ψ₁(x), B ∈ Ψ₂(F₁(x)) }`.
pub fn chain(psi1: &SSDerivative, f1: VectorFn, psi2: &SSDerivative) -> Result<SSDerivative> {
    if psi1.rows() != psi2.cols() {
        return Err(Error::dims("chain", psi2.cols(), psi1.rows()));
    }
    let (p1, p2) = (psi1.clone(), psi2.clone());
    let (rows, cols) = (psi2.rows(), psi1.cols());
    Ok(SSDerivative::new(rows, cols, move |x| {
        let inner = p1.eval(x)?;
        let y = f1(x);
        let outer = p2.eval(&y).map_err(|e| match e {
            Error::DomainViolation { .. } => Error::DomainViolation { point: x.to_vec() },
            other => Error::at(x, other),
        })?;
        let mut out = MatrixSet::new(rows, cols);
        for b in outer.iter() {
            for a in inner.iter() {
                out.insert(b * a)?;
            }
        }
        Ok(out)
    })
    .with_domain(psi1.domain().clone()))
}

/// Sum rule: pairwise (Minkowski) sums of the two sets.
pub fn sum(psi1: &SSDerivative, psi2: &SSDerivative) -> Result<SSDerivative> {
    if psi1.rows() != psi2.rows() || psi1.cols() != psi2.cols() {
        return Err(Error::dims(
            "sum",
            psi1.rows() * psi1.cols(),
            psi2.rows() * psi2.cols(),
        ));
    }
    let (p1, p2) = (psi1.clone(), psi2.clone());
    let (rows, cols) = (psi1.rows(), psi1.cols());
    let d2 = psi2.domain().clone();
    let domain = match psi1.domain() {
        Domain::All => d2,
        d1 => {
            let (d1, d2) = (d1.clone(), d2);
            Domain::Predicate(Arc::new(move |x| d1.contains(x) && d2.contains(x)))
        }
    };
    Ok(SSDerivative::new(rows, cols, move |x| {
        let a = p1.eval(x)?;
        let b = p2.eval(x)?;
        let mut out = MatrixSet::new(rows, cols);
        for u in a.iter() {
            for v in b.iter() {
                out.insert(u + v)?;
            }
        }
        Ok(out)
    })
    .with_domain(domain))
}

/// Stacks scalar-valued derivatives row by row over the Cartesian product of their values.
pub fn assemble_rows(psis: &[SSDerivative]) -> Result<SSDerivative> {
    let first = psis
        .first()
        .ok_or_else(|| Error::InvalidInput("assemble_rows needs at least one component".into()))?;
    let n = first.cols();
    for p in psis {
        if p.rows() != 1 {
            return Err(Error::dims("assemble_rows (rows)", 1, p.rows()));
        }
        if p.cols() != n {
            return Err(Error::dims("assemble_rows (cols)", n, p.cols()));
        }
    }
    let parts = psis.to_vec();
    let m = parts.len();
    let domains: Vec<Domain> = parts.iter().map(|p| p.domain().clone()).collect();
    Ok(SSDerivative::new(m, n, move |x| {
        let values = parts.iter().map(|p| p.eval(x)).collect::<Result<Vec<_>>>()?;
        let mut combos = vec![DMatrix::<f64>::zeros(0, n)];
        for v in &values {
            let mut next = Vec::with_capacity(combos.len() * v.len());
            for c in &combos {
                for row in v.iter() {
                    let mut grown = c.clone().resize_vertically(c.nrows() + 1, 0.0);
                    grown.row_mut(c.nrows()).copy_from(&row.row(0));
                    next.push(grown);
                }
            }
            combos = next;
        }
        MatrixSet::from_elements(m, n, combos)
    })
    .with_domain(Domain::Predicate(Arc::new(move |x| {
        domains.iter().all(|d| d.contains(x))
    }))))
}

/// Sampling controls for the pointwise closure surrogates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoclOptions {
    pub radius: f64,
    pub samples_per_shell: usize,
    pub shells: usize,
    /// Collected elements closer than this are identified before taking the hull.
    pub merge_tol: f64,
    pub seed: u64,
}

impl CoclOptions {
    pub fn new(radius: f64, samples_per_shell: usize) -> Self {
        Self {
            radius,
            samples_per_shell,
            shells: SHELLS,
            merge_tol: DEDUP_TOL,
            seed: DEFAULT_SEED,
        }
    }
}

/// Points `x` and shells of radii `r·2^{-k}`, `k = 0..=shells`, at which the surrogates evaluate Ψ.
fn sample_sites(x: &[f64], opts: &CoclOptions) -> Vec<Vec<f64>> {
    let mut sites = vec![x.to_vec()];
    for k in 0..=opts.shells {
        let r = opts.radius * 0.5f64.powi(k as i32);
        sites.extend(shell_points(x, r, opts.samples_per_shell, opts.seed.wrapping_add(k as u64)));
    }
    sites
}

/// All values of Ψ at `x` and at the sampled nearby points (inside the domain).
pub fn collect_nearby(psi: &SSDerivative, x: &[f64], opts: &CoclOptions) -> Result<MatrixSet> {
    if x.len() != psi.cols() {
        return Err(Error::dims("collect_nearby", psi.cols(), x.len()));
    }
    let mut out = MatrixSet::new(psi.rows(), psi.cols());
    let mut any = false;
    for site in sample_sites(x, opts) {
        if !psi.domain().contains(&site) {
            continue;
        }
        any = true;
        for m in psi.eval(&site)? {
            out.insert_with_tol(m, opts.merge_tol)?;
        }
    }
    if !any {
        return Err(Error::DomainViolation { point: x.to_vec() });
    }
    Ok(out)
}

/// Inner approximation of `(cocl Ψ)(x) = conv (cl Ψ)(x)`, returned as its vertex list.
pub fn cocl_at(psi: &SSDerivative, x: &[f64], sample_radius: f64, sample_count: usize) -> Result<MatrixSet> {
    cocl_at_with(psi, x, &CoclOptions::new(sample_radius, sample_count))
}

pub fn cocl_at_with(psi: &SSDerivative, x: &[f64], opts: &CoclOptions) -> Result<MatrixSet> {
    let collected = collect_nearby(psi, x, opts)?;
    hull_vertices(&collected)
}

/// Sampled surrogate of `bnd Ψ(x)`: the largest operator norm seen near `x`.
pub fn bnd_at(psi: &SSDerivative, x: &[f64], sample_radius: f64, sample_count: usize) -> Result<f64> {
    let opts = CoclOptions::new(sample_radius, sample_count);
    let mut best: Option<f64> = None;
    for site in sample_sites(x, &opts) {
        if !psi.domain().contains(&site) {
            continue;
        }
        let norm = psi.eval(&site)?.max_norm();
        best = Some(best.map_or(norm, |b| b.max(norm)));
    }
    best.ok_or(Error::DomainViolation { point: x.to_vec() })
}

/// Extreme points of a finite set of matrices (viewed as vectors).
pub fn hull_vertices(set: &MatrixSet) -> Result<MatrixSet> {
    let pts = set.flattened();
    let dim = set.rows() * set.cols();
    let keep: Vec<usize> = match dim {
        0 => (0..pts.len().min(1)).collect(),
        1 => hull_1d(&pts),
        2 => hull_2d(&pts),
        _ => hull_by_elimination(&pts)?,
    };
    let mut out = MatrixSet::new(set.rows(), set.cols());
    for i in keep {
        out.elements.push(set.elements[i].clone());
    }
    Ok(out)
}

fn hull_1d(pts: &[Vec<f64>]) -> Vec<usize> {
    let lo = (0..pts.len()).min_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]));
    let hi = (0..pts.len()).max_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]));
    match (lo, hi) {
        (Some(l), Some(h)) if l == h => vec![l],
        (Some(l), Some(h)) => {
            let mut v = vec![l, h];
            v.sort_unstable();
            v
        }
        _ => Vec::new(),
    }
}

/// Andrew's monotone chain; collinear points are dropped.
fn hull_2d(pts: &[Vec<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| {
        pts[a][0]
            .total_cmp(&pts[b][0])
            .then(pts[a][1].total_cmp(&pts[b][1]))
    });
    if idx.len() <= 2 {
        idx.sort_unstable();
        return idx;
    }
    let scale = pts
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0_f64, |a, v| a.max(v.abs()))
        .max(1.0);
    let eps = 1e-14 * scale * scale;
    let cross = |o: usize, a: usize, b: usize| {
        (pts[a][0] - pts[o][0]) * (pts[b][1] - pts[o][1])
            - (pts[a][1] - pts[o][1]) * (pts[b][0] - pts[o][0])
    };
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], i) <= eps {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], i) <= eps {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower.sort_unstable();
    lower.dedup();
    lower
}

fn hull_by_elimination(pts: &[Vec<f64>]) -> Result<Vec<usize>> {
    let mut keep: Vec<usize> = (0..pts.len()).collect();
    let mut i = 0;
    while i < keep.len() {
        if keep.len() == 1 {
            break;
        }
        let others: Vec<Vec<f64>> = keep
            .iter()
            .filter(|&&j| j != keep[i])
            .map(|&j| pts[j].clone())
            .collect();
        let scale = crate::linalg::norm(&pts[keep[i]]).max(1.0);
        if hull_distance(&pts[keep[i]], &others)? <= 1e-10 * scale {
            keep.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(keep)
}
