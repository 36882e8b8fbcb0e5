//! Built-in problems and the JSON problem-file format.
//!
//! Each problem bundles a function with a semismooth derivative of it, points
//! where that pair is certified, and, for scalar objectives, a pseudogradient
//! oracle with a feasible set, start point and known solution.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bundle::{solve, OraclePoint, Polyhedron, SolveOptions, SolveReport};
use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::sampling::Sampler;
use crate::scdmap::{implicit_objective, psi_from_scd, ScdMapping};
use crate::ssderiv::{chain, sum, MatrixSet, SSDerivative, ScalarFn, VectorFn};
use crate::subspace::{adjoint, Split, Subspace};
use crate::verify::GraphSampler;

pub type OracleFn = Arc<dyn Fn(&[f64]) -> Result<OraclePoint> + Send + Sync>;

pub const PROBLEM_SCHEMA_VERSION: u32 = 1;

/// Largest tolerated gap between the numeric lower-level minimizer and the analytic branch.
pub const INNER_SNAP_TOL: f64 = 1e-6;

const INNER_TOL: f64 = 1e-10;

/// Relative tolerance of the piece-membership tests of the lower-level graph.
const PIECE_TOL: f64 = 1e-12;

/// `sgn(0) = 1`.
pub fn sgn(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn sign_set(t: f64) -> Vec<f64> {
    if t == 0.0 {
        vec![1.0, -1.0]
    } else {
        vec![sgn(t)]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerLevelSolver {
    #[default]
    Analytic,
    /// Golden-section search snapped to the analytic branch.
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnownSolution {
    pub x: Vec<f64>,
    pub value: f64,
    #[serde(default = "default_solution_tol")]
    pub tol: f64,
}

fn default_solution_tol() -> f64 {
    1e-6
}

/// Scalar objective with its oracle, feasible set and reference data.
#[derive(Clone)]
pub struct Objective {
    pub theta: ScalarFn,
    pub oracle: OracleFn,
    pub uad: Polyhedron,
    pub x0: Vec<f64>,
    pub known_solution: Option<KnownSolution>,
    pub convex: bool,
}

/// An SCD mapping together with a solution selection and a graph sampler.
#[derive(Clone)]
pub struct ScdComponent {
    pub mapping: ScdMapping,
    pub selection: VectorFn,
    pub graph_sampler: Arc<dyn GraphSampler>,
    /// Graph points `(x, y, z)` where the SCD-ss* ratio is certified.
    pub certified_graph_points: Vec<Vec<f64>>,
}

#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub description: String,
    pub dim: usize,
    /// The certified function; `θ` as a 1-vector for scalar objectives.
    pub function: VectorFn,
    pub derivative: SSDerivative,
    pub objective: Option<Objective>,
    pub scd: Option<ScdComponent>,
    pub certified_points: Vec<Vec<f64>>,
    /// Box used by sampled checks (`lo`, `hi`).
    pub verify_box: (Vec<f64>, Vec<f64>),
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("objective", &self.objective.is_some())
            .field("scd", &self.scd.is_some())
            .finish()
    }
}

impl Problem {
    pub fn objective(&self) -> Result<&Objective> {
        self.objective
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("problem '{}' has no scalar objective", self.name)))
    }

    /// Runs the bundle solver from `x0`, or from the default start.
    pub fn solve(&self, x0: Option<&[f64]>, opts: &SolveOptions) -> Result<SolveReport> {
        let obj = self.objective()?;
        let x0 = x0.unwrap_or(&obj.x0);
        if x0.len() != self.dim {
            return Err(Error::dims("start point", self.dim, x0.len()));
        }
        let oracle = obj.oracle.clone();
        solve(&move |x: &[f64]| oracle(x), &obj.uad, x0, opts)
    }

    /// Scalar view of [`Problem::function`], for one-row problems.
    pub fn scalar_function(&self) -> Result<ScalarFn> {
        if self.derivative.rows() != 1 {
            return Err(Error::InvalidInput(format!("problem '{}' is not scalar", self.name)));
        }
        let f = self.function.clone();
        Ok(Arc::new(move |x: &[f64]| f(x)[0]))
    }

    /// The single-element derivative `x ↦ {gᵀ}` given by the oracle.
    pub fn oracle_derivative(&self) -> Result<SSDerivative> {
        let oracle = self.objective()?.oracle.clone();
        Ok(SSDerivative::new(1, self.dim, move |x| {
            MatrixSet::rows_of(x.len(), &[oracle(x)?.g])
        }))
    }
}

fn objective_problem(
    name: &str,
    description: &str,
    theta: ScalarFn,
    derivative: SSDerivative,
    oracle: OracleFn,
    uad: Polyhedron,
    x0: Vec<f64>,
    known_solution: Option<KnownSolution>,
    certified_points: Vec<Vec<f64>>,
    half_width: f64,
) -> Problem {
    let dim = x0.len();
    let f = theta.clone();
    Problem {
        name: name.to_string(),
        description: description.to_string(),
        dim,
        function: Arc::new(move |x: &[f64]| vec![f(x)]),
        derivative,
        objective: Some(Objective {
            theta,
            oracle,
            uad,
            x0,
            known_solution,
            convex: true,
        }),
        scd: None,
        certified_points,
        verify_box: (vec![-half_width; dim], vec![half_width; dim]),
    }
}

// ---------------------------------------------------------------------------
// Objective kinds

/// `θ(x) = Σ wᵢ |xᵢ|` with all sign choices at zero coordinates.
pub fn weighted_l1(weights: Vec<f64>) -> Result<(ScalarFn, SSDerivative, OracleFn)> {
    if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput("l1 weights must be positive and finite".into()));
    }
    let n = weights.len();
    let w = Arc::new(weights);
    let theta: ScalarFn = {
        let w = w.clone();
        Arc::new(move |x: &[f64]| x.iter().zip(w.iter()).map(|(v, w)| w * v.abs()).sum())
    };
    let derivative = {
        let w = w.clone();
        SSDerivative::from_rows(n, move |x| {
            let mut rows: Vec<Vec<f64>> = vec![Vec::with_capacity(n)];
            for (v, wi) in x.iter().zip(w.iter()) {
                let signs = sign_set(*v);
                rows = rows
                    .into_iter()
                    .flat_map(|r| {
                        signs.iter().map(move |s| {
                            let mut r = r.clone();
                            r.push(wi * s);
                            r
                        })
                    })
                    .collect();
            }
            rows
        })
    };
    let oracle: OracleFn = {
        let theta = theta.clone();
        Arc::new(move |x: &[f64]| {
            if x.len() != n {
                return Err(Error::dims("l1 oracle", n, x.len()));
            }
            Ok(OraclePoint {
                x: x.to_vec(),
                value: theta(x),
                g: x.iter().zip(w.iter()).map(|(v, w)| w * sgn(*v)).collect(),
            })
        })
    };
    Ok((theta, derivative, oracle))
}

/// `θ(x) = maxᵢ (aᵢ/2 ‖x − cᵢ‖² + oᵢ)` with the gradients of all maximizing pieces.
pub fn max_of_quadratics(
    curvatures: Vec<f64>,
    centers: Vec<Vec<f64>>,
    offsets: Vec<f64>,
) -> Result<(ScalarFn, SSDerivative, OracleFn)> {
    let k = centers.len();
    if k == 0 || curvatures.len() != k || offsets.len() != k {
        return Err(Error::InvalidInput(
            "max_quadratics needs equally many curvatures, centers and offsets".into(),
        ));
    }
    let n = centers[0].len();
    if n == 0 || centers.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("max_quadratics centers must share one positive dimension".into()));
    }
    if curvatures.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidInput("max_quadratics curvatures must be positive".into()));
    }
    let data = Arc::new((curvatures, centers, offsets));
    let pieces = {
        let data = data.clone();
        move |x: &[f64]| -> Vec<f64> {
            let (a, c, o) = &*data;
            (0..a.len())
                .map(|i| 0.5 * a[i] * c[i].iter().zip(x).map(|(ci, xi)| (xi - ci).powi(2)).sum::<f64>() + o[i])
                .collect()
        }
    };
    let pieces = Arc::new(pieces);
    let gradient = {
        let data = data.clone();
        move |i: usize, x: &[f64]| -> Vec<f64> {
            let (a, c, _) = &*data;
            x.iter().zip(&c[i]).map(|(xi, ci)| a[i] * (xi - ci)).collect()
        }
    };
    let gradient = Arc::new(gradient);
    let theta: ScalarFn = {
        let pieces = pieces.clone();
        Arc::new(move |x: &[f64]| pieces(x).into_iter().fold(f64::NEG_INFINITY, f64::max))
    };
    let derivative = {
        let (pieces, gradient) = (pieces.clone(), gradient.clone());
        SSDerivative::from_rows(n, move |x| {
            let v = pieces(x);
            let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..v.len()).filter(|i| v[*i] == top).map(|i| gradient(i, x)).collect()
        })
    };
    let oracle: OracleFn = Arc::new(move |x: &[f64]| {
        if x.len() != n {
            return Err(Error::dims("max_quadratics oracle", n, x.len()));
        }
        let v = pieces(x);
        let (best, value) = v
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, vi)| if *vi > acc.1 { (i, *vi) } else { acc });
        Ok(OraclePoint {
            x: x.to_vec(),
            value,
            g: gradient(best, x),
        })
    });
    Ok((theta, derivative, oracle))
}

// ---------------------------------------------------------------------------
// Lower-level example: f(ξ, y) = max(½y² − ξy, −½y²), F = ∂_y f

/// Lower-level objective `f(ξ, y)`.
pub fn lower_level_objective(xi: f64, y: f64) -> f64 {
    (0.5 * y * y - xi * y).max(-0.5 * y * y)
}

/// Golden-section minimizer of `f(ξ, ·)` on `[−|ξ|−1, |ξ|+1]`, before snapping.
pub fn golden_lower_level(xi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (-xi.abs() - 1.0, xi.abs() + 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (lower_level_objective(xi, c), lower_level_objective(xi, d));
    while b - a > INNER_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = lower_level_objective(xi, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = lower_level_objective(xi, d);
        }
    }
    0.5 * (a + b)
}

/// Numeric selection snapped to the analytic branch `σ(ξ) = ξ`.
pub fn numeric_selection(xi: f64) -> Result<f64> {
    let y = golden_lower_level(xi);
    let gap = (y - xi).abs();
    if gap > INNER_SNAP_TOL {
        return Err(Error::InnerSolve { gap });
    }
    Ok(xi)
}

fn selection(solver: LowerLevelSolver) -> VectorFn {
    match solver {
        LowerLevelSolver::Analytic => Arc::new(|x: &[f64]| vec![x[0]]),
        LowerLevelSolver::Numeric => Arc::new(|x: &[f64]| vec![numeric_selection(x[0]).unwrap_or(f64::NAN)]),
    }
}

fn near(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= PIECE_TOL * scale
}

/// The four pieces of `gph ∂_y f`, closed. Index `k` holds the points with tangent `L_{k+1}`.
fn on_piece(k: usize, x: f64, y: f64, z: f64) -> bool {
    let s = 1.0 + x.abs() + y.abs() + z.abs();
    let t = PIECE_TOL * s;
    let (lo, hi) = (x.min(0.0), x.max(0.0));
    match k {
        0 => near(z, y - x, s) && (y <= lo + t || y >= hi - t),
        1 => near(z, -y, s) && y >= lo - t && y <= hi + t,
        2 => near(y, x, s) && z >= lo - x - t && z <= hi - x + t,
        3 => near(y, 0.0, s) && z >= -hi - t && z <= -lo + t,
        _ => false,
    }
}

/// Tangent subspaces `L₁, …, L₄` of the pieces, in `(x, y, z)` coordinates.
pub fn lower_level_tangents() -> [Subspace; 4] {
    let span = |a: &[f64], b: &[f64]| Subspace::span(&[a, b]).expect("independent vectors");
    [
        span(&[1.0, 0.0, -1.0], &[0.0, 1.0, 1.0]),
        span(&[1.0, 0.0, 0.0], &[0.0, 1.0, -1.0]),
        span(&[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0]),
        span(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]),
    ]
}

fn lower_level_adjoints() -> Vec<Subspace> {
    lower_level_tangents()
        .iter()
        .map(|l| adjoint(l, Split::new(2, 1)).expect("tangent lives in R³"))
        .collect()
}

fn lower_level_mapping_with(adjoints: Vec<Subspace>) -> ScdMapping {
    ScdMapping::new(1, 1, move |x: &[f64], y: &[f64], z: &[f64]| {
        (0..4)
            .filter(|k| on_piece(*k, x[0], y[0], z[0]))
            .map(|k| adjoints[k].clone())
            .collect()
    })
    .with_graph_membership(|x: &[f64], y: &[f64], z: &[f64]| (0..4).any(|k| on_piece(k, x[0], y[0], z[0])))
}

/// `S*F` of `F = ∂_y f` for the lower-level example.
pub fn lower_level_mapping() -> ScdMapping {
    lower_level_mapping_with(lower_level_adjoints())
}

/// Negative control: `L₄` replaced by `L₃` on the fourth piece.
pub fn lower_level_mapping_wrong() -> ScdMapping {
    let mut adj = lower_level_adjoints();
    adj[3] = adj[2].clone();
    lower_level_mapping_with(adj)
}

/// Samples points of `gph ∂_y f` with distance in `(r/2, r]` from the center.
pub fn lower_level_graph_sampler(center: &[f64], radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let (xb, yb, zb) = (center[0], center[1], center[2]);
    let mut sampler = Sampler::new(2, seed);
    let mut out = Vec::with_capacity(count);
    let max_draws = 64 * count.max(1);
    for draw in 0..max_draws {
        if out.len() >= count {
            break;
        }
        let u = sampler.next_unit();
        let angle = 2.0 * PI * u[0];
        let target = radius * (1.0 - 0.5 * u[1]);
        let (a, b) = (angle.cos(), angle.sin());
        let k = draw % 4;
        let (base, dir) = match k {
            0 => ([xb, yb, yb - xb], [a, b, b - a]),
            1 => ([xb, yb, -yb], [a, b, -b]),
            2 => ([xb, xb, zb], [a, a, b]),
            _ => ([xb, 0.0, zb], [a, 0.0, b]),
        };
        let w0: Vec<f64> = base.iter().zip(center).map(|(q, c)| q - c).collect();
        let aa: f64 = dir.iter().map(|d| d * d).sum();
        let bb: f64 = w0.iter().zip(&dir).map(|(w, d)| w * d).sum();
        let cc: f64 = w0.iter().map(|w| w * w).sum::<f64>() - target * target;
        let disc = bb * bb - aa * cc;
        if disc < 0.0 {
            continue;
        }
        let rho = (-bb + disc.sqrt()) / aa;
        if rho < 0.0 {
            continue;
        }
        let p: Vec<f64> = base.iter().zip(&dir).map(|(q, d)| q + rho * d).collect();
        let d = dist(&p, center);
        if d > 0.5 * radius && d <= radius && on_piece(k, p[0], p[1], p[2]) {
            out.push(p);
        }
    }
    out
}

/// The lower-level example with `σ(ξ) = ξ` and `Ψ = {−X_{L*}ᵀ}` from `S*F`.
pub fn paper_lower_level() -> Problem {
    paper_lower_level_with(LowerLevelSolver::Analytic)
}

pub fn paper_lower_level_with(solver: LowerLevelSolver) -> Problem {
    let mapping = lower_level_mapping();
    let sigma = selection(solver);
    let psi = psi_from_scd(&mapping, sigma.clone());
    let grid: Vec<Vec<f64>> = (0..21)
        .map(|i| {
            let x = -1.0 + 0.1 * i as f64;
            vec![x, x, 0.0]
        })
        .collect();
    Problem {
        name: "paper_lower_level".into(),
        description: "selection of the stationary points of a nonconvex lower-level problem".into(),
        dim: 1,
        function: sigma.clone(),
        derivative: psi,
        objective: None,
        scd: Some(ScdComponent {
            mapping,
            selection: sigma,
            graph_sampler: Arc::new(lower_level_graph_sampler),
            certified_graph_points: grid,
        }),
        certified_points: vec![vec![0.0], vec![0.5], vec![-0.7]],
        verify_box: (vec![-1.0], vec![1.0]),
    }
}

// ---------------------------------------------------------------------------
// Bilevel example

/// Upper-level objective `φ(x, y) = 2|y − |x₁|| − |x₂| + ½x₁²`.
pub fn upper_level_objective(p: &[f64]) -> f64 {
    2.0 * (p[2] - p[0].abs()).abs() - p[1].abs() + 0.5 * p[0] * p[0]
}

fn abs_derivative() -> SSDerivative {
    SSDerivative::from_fn(1, 1, |x| {
        sign_set(x[0])
            .into_iter()
            .map(|s| DMatrix::from_element(1, 1, s))
            .collect()
    })
}

fn coordinate(n: usize, i: usize) -> (VectorFn, SSDerivative) {
    let mut row = DMatrix::zeros(1, n);
    row[(0, i)] = 1.0;
    (Arc::new(move |x: &[f64]| vec![x[i]]), SSDerivative::constant(row))
}

/// Derivative of `|xᵢ|` on `Rⁿ` via the chain rule.
fn abs_coordinate(n: usize, i: usize) -> Result<SSDerivative> {
    let (f, d) = coordinate(n, i);
    chain(&d, f, &abs_derivative())
}

/// Derivative of `φ` on `R³` built from the calculus rules.
fn upper_level_derivative() -> Result<SSDerivative> {
    let (y, dy) = coordinate(3, 2);
    let inner_fn: VectorFn = Arc::new(move |p: &[f64]| vec![y(p)[0] - p[0].abs()]);
    let inner = sum(&dy, &abs_coordinate(3, 0)?.scaled(-1.0))?;
    let outer = chain(&inner, inner_fn, &abs_derivative())?.scaled(2.0);
    let smooth = SSDerivative::from_rows(3, |p| vec![vec![p[0], 0.0, 0.0]]);
    sum(&sum(&outer, &abs_coordinate(3, 1)?.scaled(-1.0))?, &smooth)
}

/// `η(x) = |x₁| − |x₂|`.
pub fn eta(x: &[f64]) -> f64 {
    x[0].abs() - x[1].abs()
}

fn eta_derivative() -> Result<SSDerivative> {
    sum(&abs_coordinate(2, 0)?, &abs_coordinate(2, 1)?.scaled(-1.0))
}

/// The displayed oracle element at `x`, given `σ(η(x))`.
pub fn bilevel_oracle_gradient(x: &[f64], sigma_eta: f64) -> Vec<f64> {
    let u = sigma_eta - x[0].abs();
    let psi_tilde = if eta(x) != 0.0 { 1.0 } else { 0.0 };
    vec![
        2.0 * sgn(u) * (psi_tilde - 1.0) * sgn(x[0]) + x[0],
        -2.0 * sgn(u) * psi_tilde * sgn(x[1]) - sgn(x[1]),
    ]
}

/// Bilevel example `min φ(x, σ(η(x)))` with the lower-level selection `σ`.
pub fn paper_bilevel() -> Problem {
    paper_bilevel_with(LowerLevelSolver::Analytic).expect("built-in problem")
}

pub fn paper_bilevel_with(solver: LowerLevelSolver) -> Result<Problem> {
    let lower = lower_level_mapping();
    let sigma = selection(solver);
    let eta_fn: VectorFn = Arc::new(|x: &[f64]| vec![eta(x)]);
    let composed: VectorFn = {
        let sigma = sigma.clone();
        Arc::new(move |x: &[f64]| sigma(&[eta(x)]))
    };
    let psi_sigma = psi_from_scd(&lower, sigma.clone());
    let psi_composed = chain(&eta_derivative()?, eta_fn, &psi_sigma)?;
    let implicit = implicit_objective(
        composed.clone(),
        &psi_composed,
        Arc::new(upper_level_objective),
        &upper_level_derivative()?,
    )?;
    let theta = implicit.theta.clone();
    let oracle: OracleFn = {
        let theta = theta.clone();
        Arc::new(move |x: &[f64]| {
            if x.len() != 2 {
                return Err(Error::dims("paper_bilevel oracle", 2, x.len()));
            }
            let s = composed(x)[0];
            if !s.is_finite() {
                return Err(Error::OracleFailure(format!("lower-level solve failed at {x:?}")));
            }
            Ok(OraclePoint {
                x: x.to_vec(),
                value: theta(x),
                g: bilevel_oracle_gradient(x, s),
            })
        })
    };
    let mut p = objective_problem(
        "paper_bilevel",
        "nonsmooth bilevel program with a nonconvex lower level",
        theta,
        implicit.derivative,
        oracle,
        Polyhedron::unconstrained(),
        vec![5.0, -1.0],
        Some(KnownSolution {
            x: vec![0.0, 0.0],
            value: 0.0,
            tol: 1e-3,
        }),
        vec![vec![0.0, 0.0], vec![1.0, -1.0], vec![0.5, 0.0], vec![0.0, 0.3]],
        1.0,
    );
    if let Some(obj) = p.objective.as_mut() {
        obj.convex = false;
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// Classic suite

fn l1_problem(name: &str, x0: Vec<f64>, uad: Polyhedron, solution: Vec<f64>, certified: Vec<Vec<f64>>) -> Problem {
    let n = x0.len();
    let (theta, derivative, oracle) = weighted_l1(vec![1.0; n]).expect("unit weights");
    let value = theta(&solution);
    objective_problem(
        name,
        "sum of absolute values",
        theta,
        derivative,
        oracle,
        uad,
        x0,
        Some(KnownSolution {
            x: solution,
            value,
            tol: 1e-6,
        }),
        certified,
        2.0,
    )
}

pub fn l1_n2() -> Problem {
    l1_problem(
        "l1_n2",
        vec![3.0, -2.0],
        Polyhedron::unconstrained(),
        vec![0.0, 0.0],
        vec![vec![0.0, 0.0], vec![0.0, 1.5], vec![-0.4, 0.0]],
    )
}

pub fn l1_n5() -> Problem {
    l1_problem(
        "l1_n5",
        vec![1.0, -2.0, 3.0, -4.0, 5.0],
        Polyhedron::unconstrained(),
        vec![0.0; 5],
        vec![vec![0.0; 5], vec![0.0, 1.0, 0.0, -1.0, 0.0]],
    )
}

pub fn l1_halfspace() -> Problem {
    let mut p = l1_problem(
        "l1_halfspace",
        vec![3.0, -2.0],
        Polyhedron::inequalities(vec![vec![-1.0, 0.0]], vec![-1.0]),
        vec![1.0, 0.0],
        vec![vec![1.0, 0.0], vec![0.0, 0.0]],
    );
    p.description = "sum of absolute values on the halfspace x1 >= 1".into();
    p
}

pub fn maxq_1d() -> Problem {
    let (theta, derivative, oracle) =
        max_of_quadratics(vec![2.0, 2.0], vec![vec![0.0], vec![2.0]], vec![0.0, 0.0]).expect("valid pieces");
    objective_problem(
        "maxq_1d",
        "max(x^2, (x-2)^2)",
        theta,
        derivative,
        oracle,
        Polyhedron::unconstrained(),
        vec![5.0],
        Some(KnownSolution {
            x: vec![1.0],
            value: 1.0,
            tol: 1e-6,
        }),
        vec![vec![1.0], vec![0.0]],
        3.0,
    )
}

pub fn maxq_n2() -> Problem {
    let centers = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
    let (theta, derivative, oracle) =
        max_of_quadratics(vec![1.0; 4], centers, vec![-0.5; 4]).expect("valid pieces");
    objective_problem(
        "maxq_n2",
        "max of four quadratics, equal to |x|^2/2 + |x|_inf",
        theta,
        derivative,
        oracle,
        Polyhedron::unconstrained(),
        vec![2.0, -3.0],
        Some(KnownSolution {
            x: vec![0.0, 0.0],
            value: 0.0,
            tol: 1e-6,
        }),
        vec![vec![0.0, 0.0], vec![0.5, 0.5], vec![0.7, 0.0]],
        2.0,
    )
}

pub fn classic_suite() -> Vec<Problem> {
    vec![l1_n2(), l1_n5(), maxq_1d(), maxq_n2(), l1_halfspace()]
}

/// Registered names, in listing order.
pub fn names() -> Vec<&'static str> {
    vec![
        "paper_bilevel",
        "paper_lower_level",
        "l1_n2",
        "l1_n5",
        "maxq_1d",
        "maxq_n2",
        "l1_halfspace",
    ]
}

pub fn by_name(name: &str) -> Result<Problem> {
    by_name_with(name, LowerLevelSolver::Analytic)
}

pub fn by_name_with(name: &str, solver: LowerLevelSolver) -> Result<Problem> {
    match name {
        "paper_bilevel" => paper_bilevel_with(solver),
        "paper_lower_level" => Ok(paper_lower_level_with(solver)),
        "l1_n2" => Ok(l1_n2()),
        "l1_n5" => Ok(l1_n5()),
        "maxq_1d" => Ok(maxq_1d()),
        "maxq_n2" => Ok(maxq_n2()),
        "l1_halfspace" => Ok(l1_halfspace()),
        other => Err(Error::InvalidInput(format!("unknown problem '{other}'"))),
    }
}

pub fn registry() -> Vec<Problem> {
    names().into_iter().map(|n| by_name(n).expect("registered")).collect()
}

/// A function with a derivative that is deliberately not semismooth at `point`.
#[derive(Clone)]
pub struct NegativeControl {
    pub name: &'static str,
    pub function: VectorFn,
    pub derivative: SSDerivative,
    pub point: Vec<f64>,
}

pub fn negative_controls() -> Vec<NegativeControl> {
    let abs: VectorFn = Arc::new(|x: &[f64]| vec![x[0].abs()]);
    let bilevel = paper_bilevel();
    let lower = paper_lower_level();
    vec![
        NegativeControl {
            name: "abs_zero_derivative",
            function: abs,
            derivative: SSDerivative::constant(DMatrix::zeros(1, 1)),
            point: vec![0.0],
        },
        NegativeControl {
            name: "bilevel_smooth_part_only",
            function: bilevel.function,
            derivative: SSDerivative::from_rows(2, |x| vec![vec![x[0], 0.0]]),
            point: vec![0.0, 0.0],
        },
        NegativeControl {
            name: "lower_level_zero_derivative",
            function: lower.function,
            derivative: SSDerivative::constant(DMatrix::zeros(1, 1)),
            point: vec![0.0],
        },
    ]
}

// ---------------------------------------------------------------------------
// Problem files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    L1 {
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    MaxQuadratics {
        curvatures: Vec<f64>,
        centers: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
    Quadratic {
        center: Vec<f64>,
        #[serde(default = "default_curvature")]
        curvature: f64,
    },
    PaperBilevel {
        #[serde(default)]
        lower_level: LowerLevelSolver,
    },
}

fn default_curvature() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: u32,
    pub name: String,
    pub dim: usize,
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub polyhedron: Polyhedron,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub known_solution: Option<KnownSolution>,
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<Problem> {
        if self.schema_version != PROBLEM_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported problem schema_version {}",
                self.schema_version
            )));
        }
        let n = self.dim;
        if n == 0 {
            return Err(Error::InvalidInput("dim must be positive".into()));
        }
        if self.x0.len() != n {
            return Err(Error::dims("problem file x0", n, self.x0.len()));
        }
        self.polyhedron.validate(n)?;
        if let Some(ks) = &self.known_solution {
            if ks.x.len() != n {
                return Err(Error::dims("problem file known_solution", n, ks.x.len()));
            }
            if !self.polyhedron.contains(&ks.x, 1e-9) {
                return Err(Error::InvalidInput("known_solution is infeasible".into()));
            }
        }
        let mut convex = true;
        let (theta, derivative, oracle) = match self.objective {
            ObjectiveSpec::L1 { weights } => {
                let w = weights.unwrap_or_else(|| vec![1.0; n]);
                if w.len() != n {
                    return Err(Error::dims("l1 weights", n, w.len()));
                }
                weighted_l1(w)?
            }
            ObjectiveSpec::MaxQuadratics {
                curvatures,
                centers,
                offsets,
            } => {
                if centers.first().is_some_and(|c| c.len() != n) {
                    return Err(Error::dims("max_quadratics centers", n, centers[0].len()));
                }
                max_of_quadratics(curvatures, centers, offsets)?
            }
            ObjectiveSpec::Quadratic { center, curvature } => {
                if center.len() != n {
                    return Err(Error::dims("quadratic center", n, center.len()));
                }
                max_of_quadratics(vec![curvature], vec![center], vec![0.0])?
            }
            ObjectiveSpec::PaperBilevel { lower_level } => {
                if n != 2 {
                    return Err(Error::dims("paper_bilevel dim", 2, n));
                }
                let base = paper_bilevel_with(lower_level)?;
                let obj = base.objective.expect("objective problem");
                convex = false;
                (obj.theta, base.derivative, obj.oracle)
            }
        };
        let mut p = objective_problem(
            &self.name,
            "user problem",
            theta,
            derivative,
            oracle,
            self.polyhedron,
            self.x0,
            self.known_solution,
            Vec::new(),
            2.0,
        );
        if let Some(obj) = p.objective.as_mut() {
            obj.convex = convex;
        }
        Ok(p)
    }
}
