use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::qp::{self, Blocks};
use crate::error::{Error, Result};
use crate::linalg::{dist, norm};

/// Feasibility slack used for the start point and the trial points.
const FEAS_TOL: f64 = 1e-9;

/// `{x : A_ineq x ≤ b_ineq, A_eq x = b_eq}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    #[serde(default)]
    pub a_ineq: Vec<Vec<f64>>,
    #[serde(default)]
    pub b_ineq: Vec<f64>,
    #[serde(default)]
    pub a_eq: Vec<Vec<f64>>,
    #[serde(default)]
    pub b_eq: Vec<f64>,
}

impl Polyhedron {
    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn inequalities(a: Vec<Vec<f64>>, b: Vec<f64>) -> Self {
        Self {
            a_ineq: a,
            b_ineq: b,
            ..Self::default()
        }
    }

    pub fn is_unconstrained(&self) -> bool {
        self.a_ineq.is_empty() && self.a_eq.is_empty()
    }

    /// Checks that every row has `n` entries and the right-hand sides match.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.a_ineq.len() != self.b_ineq.len() {
            return Err(Error::dims("Polyhedron (b_ineq)", self.a_ineq.len(), self.b_ineq.len()));
        }
        if self.a_eq.len() != self.b_eq.len() {
            return Err(Error::dims("Polyhedron (b_eq)", self.a_eq.len(), self.b_eq.len()));
        }
        for row in self.a_ineq.iter().chain(&self.a_eq) {
            if row.len() != n {
                return Err(Error::dims("Polyhedron (row)", n, row.len()));
            }
        }
        Ok(())
    }

    /// Slacks `b − A x` of the inequality rows.
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        self.a_ineq
            .iter()
            .zip(&self.b_ineq)
            .map(|(a, b)| b - dot(a, x))
            .collect()
    }

    /// Largest constraint violation at `x` (zero when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let ineq = self.slacks(x).into_iter().fold(0.0_f64, |a, s| a.max(-s));
        let eq = self
            .a_eq
            .iter()
            .zip(&self.b_eq)
            .fold(0.0_f64, |a, (row, b)| a.max((dot(row, x) - b).abs()));
        ineq.max(eq)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(x, θ(x), g)` with `gᵀ` an element of the semismooth derivative at `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub x: Vec<f64>,
    pub value: f64,
    pub g: Vec<f64>,
}

pub trait Oracle {
    fn call(&self, x: &[f64]) -> Result<OraclePoint>;
}

impl<F> Oracle for F
where
    F: Fn(&[f64]) -> Result<OraclePoint>,
{
    fn call(&self, x: &[f64]) -> Result<OraclePoint> {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Stop when `‖aggregate‖ + aggregate error` falls below this.
    pub tol: f64,
    pub max_iterations: usize,
    pub max_oracle_calls: usize,
    pub t_initial: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Fraction of the predicted decrease a serious step must realize.
    pub descent_fraction: f64,
    pub max_bundle: usize,
    /// `γ` in the linearization-error floor `γ‖x_i − center‖²`.
    pub downshift: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iterations: 500,
            max_oracle_calls: 1000,
            t_initial: 1.0,
            t_min: 1e-10,
            t_max: 1e6,
            descent_fraction: 0.1,
            max_bundle: 50,
            downshift: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Initial,
    Serious,
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub center: Vec<f64>,
    pub theta: f64,
    pub step: StepKind,
    pub aggregate_norm: f64,
    pub prox_t: f64,
}

/// A cutting plane `l(x) = offset + gᵀx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub g: Vec<f64>,
    pub offset: f64,
    /// Point the plane was generated at; `None` for aggregate planes.
    pub origin: Option<Vec<f64>>,
    /// Distance measure to the current center, used by the error floor.
    pub locality: f64,
    pub error: f64,
}

impl Cut {
    fn from_point(p: &OraclePoint) -> Self {
        Self {
            offset: p.value - dot(&p.g, &p.x),
            g: p.g.clone(),
            origin: Some(p.x.clone()),
            locality: 0.0,
            error: 0.0,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.offset + dot(&self.g, x)
    }

    fn refresh(&mut self, center: &[f64], center_value: f64, moved: f64, gamma: f64) {
        self.locality = match &self.origin {
            Some(o) => dist(o, center),
            None => self.locality + moved,
        };
        let raw = center_value - self.value(center);
        self.error = raw.abs().max(gamma * self.locality * self.locality);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub theta: f64,
    pub stationarity: f64,
    /// `G λ + Aᵀ μ` from the last subproblem.
    pub aggregate: Vec<f64>,
    pub aggregate_error: f64,
    pub iterations: usize,
    pub oracle_calls: usize,
    pub serious_steps: usize,
    pub trace: Vec<IterationRecord>,
    /// Final bundle, for certificates.
    pub bundle: Vec<Cut>,
}

struct Subproblem {
    lambda: Vec<f64>,
    direction: Vec<f64>,
    aggregate: Vec<f64>,
    aggregate_error: f64,
}

fn subproblem(cuts: &[Cut], t: f64, uad: &Polyhedron, center: &[f64]) -> Result<Subproblem> {
    let n = center.len();
    let k = cuts.len();
    let slacks: Vec<f64> = uad.slacks(center).into_iter().map(|s| s.max(0.0)).collect();
    let p = uad.a_ineq.len();
    let q = uad.a_eq.len();
    let cols = k + p + q;
    let h = DMatrix::from_fn(n, cols, |i, j| {
        if j < k {
            cuts[j].g[i]
        } else if j < k + p {
            uad.a_ineq[j - k][i]
        } else {
            uad.a_eq[j - k - p][i]
        }
    });
    let qmat = t * h.transpose() * &h;
    let c = DVector::from_fn(cols, |j, _| {
        if j < k {
            cuts[j].error
        } else if j < k + p {
            slacks[j - k]
        } else {
            0.0
        }
    });
    let sol = qp::solve(
        &qmat,
        &c,
        Blocks {
            simplex: k,
            nonneg: p,
            free: q,
        },
    )?;
    let agg = &h * &sol.w;
    let aggregate_error = (0..k + p).map(|j| sol.w[j] * c[j]).sum();
    Ok(Subproblem {
        lambda: sol.w.rows(0, k).iter().copied().collect(),
        direction: (-t * &agg).iter().copied().collect(),
        aggregate: agg.iter().copied().collect(),
        aggregate_error,
    })
}

fn checked_call(oracle: &dyn Oracle, x: &[f64]) -> Result<OraclePoint> {
    let p = oracle
        .call(x)
        .map_err(|e| Error::OracleFailure(e.to_string()))?;
    if p.g.len() != x.len() {
        return Err(Error::OracleFailure(format!(
            "gradient has {} entries, expected {}",
            p.g.len(),
            x.len()
        )));
    }
    if !p.value.is_finite() || p.g.iter().any(|v| !v.is_finite()) {
        return Err(Error::OracleFailure(format!("non-finite oracle output at {x:?}")));
    }
    Ok(p)
}

/// Minimizes `θ` over `uad` starting from the feasible point `x0`.
pub fn solve(oracle: &dyn Oracle, uad: &Polyhedron, x0: &[f64], opts: &SolveOptions) -> Result<SolveReport> {
    let n = x0.len();
    uad.validate(n)?;
    let violation = uad.violation(x0);
    if violation > FEAS_TOL {
        return Err(Error::InfeasibleStart { violation });
    }
    if !(opts.t_initial > 0.0) || opts.max_bundle < 2 {
        return Err(Error::InvalidInput("t_initial must be positive and max_bundle at least 2".into()));
    }

    let first = checked_call(oracle, x0)?;
    let mut oracle_calls = 1;
    let mut center = first.x.clone();
    let mut center_value = first.value;
    let mut cuts = vec![Cut::from_point(&first)];
    let mut t = opts.t_initial;
    let mut iterations = 0;
    let mut serious_steps = 0;
    let mut last_serious = false;
    let mut trace = vec![IterationRecord {
        iteration: 0,
        center: center.clone(),
        theta: center_value,
        step: StepKind::Initial,
        aggregate_norm: norm(&first.g),
        prox_t: t,
    }];

    let (status, last) = loop {
        let sub = subproblem(&cuts, t, uad, &center)?;
        let stationarity = norm(&sub.aggregate) + sub.aggregate_error;
        let agg_norm = norm(&sub.aggregate);
        let predicted = -(t * agg_norm * agg_norm + sub.aggregate_error);
        if stationarity <= opts.tol || predicted >= 0.0 {
            break (SolveStatus::Converged, sub);
        }
        if iterations >= opts.max_iterations || oracle_calls >= opts.max_oracle_calls {
            break (SolveStatus::BudgetExhausted, sub);
        }

        let trial: Vec<f64> = center.iter().zip(&sub.direction).map(|(c, d)| c + d).collect();
        let point = checked_call(oracle, &trial)?;
        oracle_calls += 1;
        iterations += 1;

        let serious = point.value <= center_value + opts.descent_fraction * predicted;
        let mut new_cut = Cut::from_point(&point);
        let step = if serious {
            let moved = dist(&trial, &center);
            center = trial;
            center_value = point.value;
            serious_steps += 1;
            if last_serious {
                t = (2.0 * t).min(opts.t_max);
            }
            last_serious = true;
            for c in cuts.iter_mut() {
                c.refresh(&center, center_value, moved, opts.downshift);
            }
            StepKind::Serious
        } else {
            if point.value > center_value {
                t = (0.5 * t).max(opts.t_min);
            }
            last_serious = false;
            StepKind::Null
        };
        new_cut.refresh(&center, center_value, 0.0, opts.downshift);

        if cuts.len() + 1 > opts.max_bundle {
            compress(&mut cuts, &sub, opts.max_bundle - 1, &center);
        }
        cuts.push(new_cut);

        trace.push(IterationRecord {
            iteration: iterations,
            center: center.clone(),
            theta: center_value,
            step,
            aggregate_norm: norm(&sub.aggregate),
            prox_t: t,
        });
    };

    Ok(SolveReport {
        status,
        stationarity: norm(&last.aggregate) + last.aggregate_error,
        x: center,
        theta: center_value,
        aggregate: last.aggregate,
        aggregate_error: last.aggregate_error,
        iterations,
        oracle_calls,
        serious_steps,
        trace,
        bundle: cuts,
    })
}

/// Shrinks the bundle to `target` cuts: inactive cuts go first (oldest first), then the
/// oldest active cuts are folded into one aggregate plane.
fn compress(cuts: &mut Vec<Cut>, sub: &Subproblem, target: usize, center: &[f64]) {
    let weights: Vec<f64> = if sub.lambda.len() == cuts.len() {
        sub.lambda.clone()
    } else {
        vec![0.0; cuts.len()]
    };
    let is_center = |c: &Cut| c.origin.as_deref() == Some(center);
    let mut entries: Vec<(Cut, f64)> = cuts.drain(..).zip(weights).collect();
    let mut i = 0;
    while entries.len() > target && i < entries.len() {
        if entries[i].1 == 0.0 && !is_center(&entries[i].0) {
            entries.remove(i);
        } else {
            i += 1;
        }
    }
    if entries.len() > target {
        // fold the oldest entries (keeping the center cut) into one plane
        let mut folded: Vec<(Cut, f64)> = Vec::new();
        let mut kept: Vec<(Cut, f64)> = Vec::new();
        let excess = entries.len() - target + 1;
        for e in entries {
            if folded.len() < excess && !is_center(&e.0) {
                folded.push(e);
            } else {
                kept.push(e);
            }
        }
        let total: f64 = folded.iter().map(|(_, w)| w).sum();
        let n = center.len();
        let agg = if total > 0.0 {
            let mut g = vec![0.0; n];
            let (mut offset, mut locality, mut error) = (0.0, 0.0, 0.0);
            for (c, w) in &folded {
                let s = w / total;
                for (gi, ci) in g.iter_mut().zip(&c.g) {
                    *gi += s * ci;
                }
                offset += s * c.offset;
                locality += s * c.locality;
                error += s * c.error;
            }
            Cut {
                g,
                offset,
                origin: None,
                locality,
                error,
            }
        } else {
            // nothing active among the folded cuts: keep the newest of them
            folded.pop().expect("at least one folded cut").0
        };
        kept.insert(0, (agg, total));
        entries = kept;
    }
    cuts.extend(entries.into_iter().map(|(c, _)| c));
}

/// Distance from the origin to `conv{bundle gradients} + N_uad(x)`, where the normal
/// cone is generated by the inequality rows active within `active_tol` and by the equality rows.
pub fn stationarity_certificate(report: &SolveReport, uad: &Polyhedron, active_tol: f64) -> Result<f64> {
    let n = report.x.len();
    let grads: Vec<&Vec<f64>> = report.bundle.iter().map(|c| &c.g).collect();
    let slacks = uad.slacks(&report.x);
    let active: Vec<&Vec<f64>> = uad
        .a_ineq
        .iter()
        .zip(&slacks)
        .filter(|(_, s)| **s <= active_tol)
        .map(|(a, _)| a)
        .collect();
    let k = grads.len();
    let p = active.len();
    let q = uad.a_eq.len();
    let h = DMatrix::from_fn(n, k + p + q, |i, j| {
        if j < k {
            grads[j][i]
        } else if j < k + p {
            active[j - k][i]
        } else {
            uad.a_eq[j - k - p][i]
        }
    });
    let sol = qp::solve(
        &(h.transpose() * &h),
        &DVector::zeros(k + p + q),
        Blocks {
            simplex: k,
            nonneg: p,
            free: q,
        },
    )?;
    Ok((h * sol.w).norm())
}
