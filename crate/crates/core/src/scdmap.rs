//! SCD mappings and the derivative oracles of their solution selections.
//!
//! For a parametric inclusion `0 ∈ F(x, y)` with `F: R^n × R^m ⇉ R^m`, the
//! adjoint SC derivative `S*F(x, y, z)` is a finite list of `m`-dimensional
//! subspaces of `R^m × R^n × R^m` in coordinates `(z*, x*, y*)`. When each of
//! them is regular, `L* = rge(Z, X, I)`, a continuous selection `σ` of the
//! solution map is semismooth with respect to `x ↦ {−Xᵀ}`; composing with a
//! semismooth objective gives the pseudogradient oracle of `θ(x) = φ(x, σ(x))`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::condition_number;
use crate::ssderiv::{MatrixSet, SSDerivative, ScalarFn, VectorFn};
use crate::subspace::{
    adjoint, regular_rep, swap_transform, Split, Subspace, REGULARITY_COND_LIMIT,
};

pub type SstarFn = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> Vec<Subspace> + Send + Sync>;
pub type GraphFn = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> bool + Send + Sync>;

/// A mapping `F: R^n × R^m ⇉ R^m` described by its adjoint SC derivative.
#[derive(Clone)]
pub struct ScdMapping {
    n: usize,
    m: usize,
    sstar: SstarFn,
    graph: Option<GraphFn>,
}

impl fmt::Debug for ScdMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScdMapping")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("graph_membership", &self.graph.is_some())
            .finish()
    }
}

impl ScdMapping {
    pub fn new<F>(n: usize, m: usize, sstar: F) -> Self
    where
        F: Fn(&[f64], &[f64], &[f64]) -> Vec<Subspace> + Send + Sync + 'static,
    {
        Self {
            n,
            m,
            sstar: Arc::new(sstar),
            graph: None,
        }
    }

    pub fn with_graph_membership<G>(mut self, graph: G) -> Self
    where
        G: Fn(&[f64], &[f64], &[f64]) -> bool + Send + Sync + 'static,
    {
        self.graph = Some(Arc::new(graph));
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn check_point(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::dims("ScdMapping (x)", self.n, x.len()));
        }
        if y.len() != self.m {
            return Err(Error::dims("ScdMapping (y)", self.m, y.len()));
        }
        if z.len() != self.m {
            return Err(Error::dims("ScdMapping (z)", self.m, z.len()));
        }
        Ok(())
    }

    /// `S*F(x, y, z)`; each subspace has dimension `m` in `R^{m+n+m}`.
    pub fn sstar_eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<Vec<Subspace>> {
        self.check_point(x, y, z)?;
        let subspaces = (self.sstar)(x, y, z);
        let point: Vec<f64> = x.iter().chain(y).chain(z).copied().collect();
        if subspaces.is_empty() {
            return Err(Error::at(&point, Error::EmptySample("adjoint SC derivative")));
        }
        let ambient = 2 * self.m + self.n;
        for s in &subspaces {
            if s.ambient() != ambient {
                return Err(Error::dims("S*F subspace (ambient)", ambient, s.ambient()));
            }
            if s.dim() != self.m {
                return Err(Error::dims("S*F subspace (dimension)", self.m, s.dim()));
            }
        }
        Ok(subspaces)
    }

    /// `S F(x, y, z)`, the adjoints of the subspaces in `S*F(x, y, z)`.
    pub fn sc_eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<Vec<Subspace>> {
        let split = Split::new(self.m, self.n + self.m);
        self.sstar_eval(x, y, z)?
            .iter()
            .map(|s| adjoint(s, split))
            .collect()
    }

    /// Graph membership, when the mapping declares it.
    pub fn on_graph(&self, x: &[f64], y: &[f64], z: &[f64]) -> Option<bool> {
        self.graph.as_ref().map(|g| g(x, y, z))
    }
}

/// A graphically Lipschitzian description of `F: R^n ⇉ R^m`: a chart `Φ` of
/// `R^{n+m}` mapping the graph of `F` onto the graph of a Lipschitz `f: R^n → R^m`.
#[derive(Clone)]
pub struct GraphLipschitzRep {
    pub split: Split,
    pub chart: VectorFn,
    pub chart_jacobian: Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>,
    /// B-Jacobian `∇̄f(u)` of the Lipschitz map.
    pub lipschitz_jacobian: SSDerivative,
}

fn chart_data(rep: &GraphLipschitzRep, point: &[f64]) -> Result<(DMatrix<f64>, MatrixSet)> {
    let size = rep.split.ambient();
    if point.len() != size {
        return Err(Error::dims("graph-Lipschitz point", size, point.len()));
    }
    let jac = (rep.chart_jacobian)(point);
    if jac.shape() != (size, size) {
        return Err(Error::dims("chart Jacobian", size, jac.nrows()));
    }
    let condition = condition_number(&jac);
    if !(condition <= REGULARITY_COND_LIMIT) {
        return Err(Error::SingularChart { condition });
    }
    let image = (rep.chart)(point);
    let u = &image[..rep.split.n];
    Ok((jac, rep.lipschitz_jacobian.eval(u)?))
}

/// `S F(x̄, ȳ) = { ∇Φ(x̄, ȳ)⁻¹ rge(I, A) : A ∈ ∇̄f(ū) }`.
pub fn sc_from_graphlip(rep: &GraphLipschitzRep, point: &[f64]) -> Result<Vec<Subspace>> {
    let (jac, jacobians) = chart_data(rep, point)?;
    let inv = jac
        .try_inverse()
        .ok_or(Error::SingularChart { condition: f64::INFINITY })?;
    jacobians
        .iter()
        .map(|a| Subspace::from_graph(a).transform(&inv))
        .collect()
}

/// `S*F(x̄, ȳ) = { S ∇Φ(x̄, ȳ)ᵀ Sᵀ rge(I, Aᵀ) : A ∈ ∇̄f(ū) }`.
pub fn sstar_from_graphlip(rep: &GraphLipschitzRep, point: &[f64]) -> Result<Vec<Subspace>> {
    let (jac, jacobians) = chart_data(rep, point)?;
    let t = swap_transform(&jac, rep.split)?;
    jacobians
        .iter()
        .map(|a| Subspace::from_graph(&a.transpose()).transform(&t))
        .collect()
}

/// `sup { κ(L*) : L* ∈ S*F(x, y, z) }`, infinite when some subspace is not regular.
pub fn scd_reg(map: &ScdMapping, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
    let layout = (map.m(), map.n(), map.m());
    let mut worst: f64 = 0.0;
    for s in map.sstar_eval(x, y, z)? {
        match regular_rep(&s, layout) {
            Ok(rep) => worst = worst.max(rep.kappa()),
            Err(Error::NotRegular { .. }) => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        }
    }
    Ok(worst)
}

/// `Ψ(x) = { −X_{L*}ᵀ : L* ∈ S*F(x, σ(x), 0) }`, an `m × n` derivative of the selection `σ`.
pub fn psi_from_scd(map: &ScdMapping, sigma: VectorFn) -> SSDerivative {
    let map = map.clone();
    let (n, m) = (map.n(), map.m());
    SSDerivative::new(m, n, move |x| {
        let y = sigma(x);
        let zero = vec![0.0; m];
        let mut out = MatrixSet::new(m, n);
        for s in map.sstar_eval(x, &y, &zero).map_err(|e| Error::at(x, e))? {
            let rep = regular_rep(&s, (m, n, m)).map_err(|e| Error::at(x, e))?;
            out.insert(-rep.x.transpose())?;
        }
        Ok(out)
    })
}

/// A reduced objective `θ(x) = φ(x, σ(x))` together with its semismooth derivative.
#[derive(Clone)]
pub struct ImplicitObjective {
    pub theta: ScalarFn,
    pub derivative: SSDerivative,
}

impl fmt::Debug for ImplicitObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImplicitObjective")
            .field("derivative", &self.derivative)
            .finish()
    }
}

/// `Θ(x) = { g_xᵀ + g_yᵀ S : (g_xᵀ, g_yᵀ) ∈ Φ(x, σ(x)), S ∈ Ψ_σ(x) }` for any selection
/// derivative `Ψ_σ`; with `Ψ_σ = {−X_{L*}ᵀ}` this is the SCD oracle.
pub fn implicit_objective(
    sigma: VectorFn,
    sigma_deriv: &SSDerivative,
    phi: ScalarFn,
    phi_deriv: &SSDerivative,
) -> Result<ImplicitObjective> {
    let (m, n) = (sigma_deriv.rows(), sigma_deriv.cols());
    if phi_deriv.rows() != 1 || phi_deriv.cols() != n + m {
        return Err(Error::dims("implicit_objective (phi derivative)", n + m, phi_deriv.cols()));
    }
    let theta: ScalarFn = {
        let sigma = sigma.clone();
        Arc::new(move |x: &[f64]| {
            let joint: Vec<f64> = x.iter().copied().chain(sigma(x)).collect();
            phi(&joint)
        })
    };
    let (sd, pd) = (sigma_deriv.clone(), phi_deriv.clone());
    let derivative = SSDerivative::new(1, n, move |x| {
        let joint: Vec<f64> = x.iter().copied().chain(sigma(x)).collect();
        let grads = pd.eval(&joint)?;
        let sens = sd.eval(x)?;
        let mut out = MatrixSet::new(1, n);
        for g in grads.iter() {
            let gx = g.columns(0, n);
            let gy = g.columns(n, m);
            for s in sens.iter() {
                out.insert(gx + gy * s)?;
            }
        }
        Ok(out)
    })
    .with_domain(sigma_deriv.domain().clone());
    Ok(ImplicitObjective { theta, derivative })
}

/// Pseudogradient oracle for `θ(x) = φ(x, σ(x))` built from `S*F`.
pub fn theta_oracle(
    map: &ScdMapping,
    sigma: VectorFn,
    phi: ScalarFn,
    phi_deriv: &SSDerivative,
) -> Result<ImplicitObjective> {
    let psi = psi_from_scd(map, sigma.clone());
    implicit_objective(sigma, &psi, phi, phi_deriv)
}
