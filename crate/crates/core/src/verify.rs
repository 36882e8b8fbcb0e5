//! Sampled certification of semismoothness-type properties.
//!
//! A property stated as a limit (`ratio → 0` as `r → 0`) is certified by a
//! finite profile over decreasing radii with a pass threshold at the smallest
//! radius. All sample points come from the seeded low-discrepancy generator and
//! are drawn before any evaluation, so results do not depend on the thread
//! schedule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::qp::hull_distance;
use crate::error::{Error, Result};
use crate::linalg::{dist, norm};
use crate::sampling::{ball_points, shell_points, Sampler, DEFAULT_SEED};
use crate::scdmap::ScdMapping;
use crate::ssderiv::{cocl_at_with, CoclOptions, SSDerivative, ScalarFn, VectorFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioProfile {
    pub radii: Vec<f64>,
    pub worst_ratio: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

impl RatioProfile {
    fn new(radii: Vec<f64>, worst_ratio: Vec<f64>, tol: f64) -> Self {
        let pass = worst_ratio.last().is_some_and(|r| *r <= tol);
        Self {
            radii,
            worst_ratio,
            tol,
            pass,
        }
    }

    pub fn final_ratio(&self) -> f64 {
        self.worst_ratio.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioOptions {
    pub radii: Vec<f64>,
    pub samples_per_shell: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for RatioOptions {
    fn default() -> Self {
        Self {
            radii: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            samples_per_shell: 32,
            tol: 1e-3,
            seed: DEFAULT_SEED,
        }
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidInput("at least one radius is required".into()));
    }
    if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("radii must be positive and strictly decreasing".into()));
    }
    Ok(())
}

fn worst(values: Vec<Result<f64>>) -> Result<f64> {
    let mut out: f64 = 0.0;
    for v in values {
        let v = v?;
        if !v.is_finite() {
            return Err(Error::InvalidInput("non-finite ratio encountered".into()));
        }
        out = out.max(v);
    }
    Ok(out)
}

/// Worst `‖F(x) − F(x̄) − A(x − x̄)‖ / ‖x − x̄‖` over shells `‖x − x̄‖ ∈ (r/2, r]` and all `A ∈ Ψ(x)`.
pub fn ss_ratio(f: &VectorFn, psi: &SSDerivative, xbar: &[f64], opts: &RatioOptions) -> Result<RatioProfile> {
    check_radii(&opts.radii)?;
    if xbar.len() != psi.cols() {
        return Err(Error::dims("ss_ratio", psi.cols(), xbar.len()));
    }
    if !psi.domain().contains(xbar) {
        return Err(Error::DomainViolation { point: xbar.to_vec() });
    }
    let fbar = f(xbar);
    if fbar.len() != psi.rows() {
        return Err(Error::dims("ss_ratio (F value)", psi.rows(), fbar.len()));
    }
    let mut ratios = Vec::with_capacity(opts.radii.len());
    for (k, &r) in opts.radii.iter().enumerate() {
        let pts = shell_points(xbar, r, opts.samples_per_shell, opts.seed.wrapping_add(k as u64));
        let values: Vec<Result<f64>> = pts
            .par_iter()
            .map(|x| {
                let fx = f(x);
                let step: Vec<f64> = x.iter().zip(xbar).map(|(a, b)| a - b).collect();
                let h = norm(&step);
                let mut worst: f64 = 0.0;
                for a in psi.eval(x)?.iter() {
                    let pred = a * nalgebra::DVector::from_column_slice(&step);
                    let res: f64 = fx
                        .iter()
                        .zip(&fbar)
                        .zip(pred.iter())
                        .map(|((fx, fb), p)| (fx - fb - p).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    worst = worst.max(res / h);
                }
                Ok(worst)
            })
            .collect();
        ratios.push(worst(values)?);
    }
    Ok(RatioProfile::new(opts.radii.clone(), ratios, opts.tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClarkeOptions {
    pub fd_step: f64,
    pub n_dirs: usize,
    /// Hull-membership tolerance.
    pub tol: f64,
    pub min_accepted: usize,
    /// Samples per shell for the `cocl` surrogate.
    pub cocl_samples: usize,
    pub seed: u64,
}

impl Default for ClarkeOptions {
    fn default() -> Self {
        Self {
            fd_step: 1e-7,
            n_dirs: 64,
            tol: 1e-3,
            min_accepted: 5,
            cocl_samples: 16,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClarkeReport {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest distance of a sampled gradient to the `cocl` hull.
    pub max_distance: f64,
    pub contained: bool,
}

/// Central difference gradient at `y`, or `None` when one-sided differences disagree.
fn fd_gradient(f: &ScalarFn, y: &[f64], h: f64) -> Option<Vec<f64>> {
    let fy = f(y);
    let mut g = Vec::with_capacity(y.len());
    let mut probe = y.to_vec();
    for j in 0..y.len() {
        probe[j] = y[j] + h;
        let fp = f(&probe);
        probe[j] = y[j] - h;
        let fm = f(&probe);
        probe[j] = y[j];
        let forward = (fp - fy) / h;
        let backward = (fy - fm) / h;
        if (forward - backward).abs() > 10.0 * h {
            return None;
        }
        g.push((fp - fm) / (2.0 * h));
    }
    Some(g)
}

/// Checks `∂^c f(x) ⊂ (cocl Ψ)(x)` with gradients sampled within `100·fd_step` of `x`.
pub fn clarke_containment(f: &ScalarFn, psi: &SSDerivative, x: &[f64], opts: &ClarkeOptions) -> Result<ClarkeReport> {
    if psi.rows() != 1 || psi.cols() != x.len() {
        return Err(Error::dims("clarke_containment", x.len(), psi.cols()));
    }
    let radius = 100.0 * opts.fd_step;
    let pts = ball_points(x, radius, opts.n_dirs, opts.seed);
    let grads: Vec<Option<Vec<f64>>> = pts.par_iter().map(|y| fd_gradient(f, y, opts.fd_step)).collect();
    let accepted: Vec<Vec<f64>> = grads.iter().flatten().cloned().collect();
    if accepted.len() < opts.min_accepted {
        return Err(Error::TooFewSamples {
            accepted: accepted.len(),
            required: opts.min_accepted,
        });
    }
    let mut cocl = CoclOptions::new(radius, opts.cocl_samples);
    cocl.seed = opts.seed.wrapping_add(1);
    let hull = cocl_at_with(psi, x, &cocl)?.flattened();
    let mut max_distance: f64 = 0.0;
    for g in &accepted {
        max_distance = max_distance.max(hull_distance(g, &hull)?);
    }
    Ok(ClarkeReport {
        accepted: accepted.len(),
        rejected: grads.len() - accepted.len(),
        max_distance,
        contained: max_distance <= opts.tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingletonOptions {
    pub radius: f64,
    pub samples_per_shell: usize,
    /// Limits closer than this are identified.
    pub merge_tol: f64,
    pub seed: u64,
}

impl Default for SingletonOptions {
    fn default() -> Self {
        Self {
            radius: 1e-6,
            samples_per_shell: 4,
            merge_tol: 1e-5,
            seed: DEFAULT_SEED,
        }
    }
}

/// Fraction of uniformly sampled points of the box at which `cocl Ψ` is a single matrix.
pub fn singleton_fraction(
    psi: &SSDerivative,
    lo: &[f64],
    hi: &[f64],
    n_samples: usize,
    opts: &SingletonOptions,
) -> Result<f64> {
    let n = psi.cols();
    if lo.len() != n || hi.len() != n {
        return Err(Error::dims("singleton_fraction (box)", n, lo.len().max(hi.len())));
    }
    if n_samples == 0 {
        return Err(Error::EmptySample("singleton_fraction"));
    }
    let mut sampler = Sampler::new(n, opts.seed);
    let pts: Vec<Vec<f64>> = (0..n_samples).map(|_| sampler.next_in_box(lo, hi)).collect();
    let cocl = CoclOptions {
        radius: opts.radius,
        samples_per_shell: opts.samples_per_shell,
        shells: crate::ssderiv::SHELLS,
        merge_tol: opts.merge_tol,
        seed: opts.seed.wrapping_add(1),
    };
    let flags: Vec<Result<bool>> = pts
        .par_iter()
        .map(|x| Ok(cocl_at_with(psi, x, &cocl)?.len() == 1))
        .collect();
    let mut hits = 0usize;
    for f in flags {
        if f? {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_samples as f64)
}

/// Produces graph points `(x, y, z)` of an SCD mapping in the shell `(r/2, r]` around a center.
pub trait GraphSampler: Send + Sync {
    fn sample(&self, center: &[f64], radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>>;
}

impl<F> GraphSampler for F
where
    F: Fn(&[f64], f64, usize, u64) -> Vec<Vec<f64>> + Send + Sync,
{
    fn sample(&self, center: &[f64], radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
        self(center, radius, count, seed)
    }
}

/// Worst `dist(z − z̄, L) / ‖z − z̄‖` over sampled graph points `z` and `L ∈ S F(z)`.
pub fn scd_ss_ratio(
    map: &ScdMapping,
    zbar: &[f64],
    sampler: &dyn GraphSampler,
    opts: &RatioOptions,
) -> Result<RatioProfile> {
    scd_ss_ratio_with(zbar, sampler, opts, |x, y, z| map.sc_eval(x, y, z), map.n(), map.m())
}

/// As [`scd_ss_ratio`] with an explicit `S F` evaluator, e.g. a deliberately wrong one.
pub fn scd_ss_ratio_with<S>(
    zbar: &[f64],
    sampler: &dyn GraphSampler,
    opts: &RatioOptions,
    sc: S,
    n: usize,
    m: usize,
) -> Result<RatioProfile>
where
    S: Fn(&[f64], &[f64], &[f64]) -> Result<Vec<crate::subspace::Subspace>> + Sync,
{
    check_radii(&opts.radii)?;
    if zbar.len() != n + 2 * m {
        return Err(Error::dims("scd_ss_ratio (zbar)", n + 2 * m, zbar.len()));
    }
    let mut ratios = Vec::with_capacity(opts.radii.len());
    for (k, &r) in opts.radii.iter().enumerate() {
        let pts = sampler.sample(zbar, r, opts.samples_per_shell, opts.seed.wrapping_add(k as u64));
        if pts.is_empty() {
            return Err(Error::EmptySample("graph shell"));
        }
        let values: Vec<Result<f64>> = pts
            .par_iter()
            .map(|p| {
                if p.len() != zbar.len() {
                    return Err(Error::dims("graph sample", zbar.len(), p.len()));
                }
                let (x, rest) = p.split_at(n);
                let (y, z) = rest.split_at(m);
                let diff: Vec<f64> = p.iter().zip(zbar).map(|(a, b)| a - b).collect();
                let h = dist(p, zbar);
                let mut worst: f64 = 0.0;
                for l in sc(x, y, z)? {
                    worst = worst.max(l.distance_to(&diff)? / h);
                }
                Ok(worst)
            })
            .collect();
        ratios.push(worst(values)?);
    }
    Ok(RatioProfile::new(opts.radii.clone(), ratios, opts.tol))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use nalgebra::DMatrix;

    use super::*;
    use crate::subspace::{adjoint, Split, Subspace};

    fn abs_fn() -> VectorFn {
        Arc::new(|x: &[f64]| vec![x[0].abs()])
    }

    fn sgn_psi() -> SSDerivative {
        SSDerivative::from_fn(1, 1, |x| {
            vec![DMatrix::from_element(1, 1, if x[0] >= 0.0 { 1.0 } else { -1.0 })]
        })
    }

    #[test]
    fn linear_map_has_zero_ratio() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let a2 = a.clone();
        let f: VectorFn = Arc::new(move |x: &[f64]| (&a2 * nalgebra::DVector::from_column_slice(x)).iter().copied().collect());
        let p = ss_ratio(&f, &SSDerivative::constant(a), &[0.3, -0.2], &RatioOptions::default()).unwrap();
        // roundoff in F(x) − F(x̄) is amplified by 1/r
        assert!(p.worst_ratio.iter().all(|r| *r < 1e-9));
        assert!(p.pass);
    }

    #[test]
    fn abs_with_sign_passes_and_zero_fails() {
        let opts = RatioOptions::default();
        let good = ss_ratio(&abs_fn(), &sgn_psi(), &[0.0], &opts).unwrap();
        assert!(good.worst_ratio.iter().all(|r| *r == 0.0));
        let zero = SSDerivative::constant(DMatrix::zeros(1, 1));
        let bad = ss_ratio(&abs_fn(), &zero, &[0.0], &opts).unwrap();
        assert!(bad.worst_ratio.iter().all(|r| (*r - 1.0).abs() < 1e-12));
        assert!(!bad.pass);
    }

    #[test]
    fn ratio_profile_is_reproducible() {
        let f: VectorFn = Arc::new(|x: &[f64]| vec![x[0].abs() + x[1].sin()]);
        let psi = SSDerivative::from_rows(2, |x| vec![vec![if x[0] >= 0.0 { 1.0 } else { -1.0 }, x[1].cos()]]);
        let a = ss_ratio(&f, &psi, &[0.0, 0.4], &RatioOptions::default()).unwrap();
        let b = ss_ratio(&f, &psi, &[0.0, 0.4], &RatioOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn radii_must_decrease() {
        let opts = RatioOptions {
            radii: vec![1e-2, 1e-1],
            ..RatioOptions::default()
        };
        assert!(ss_ratio(&abs_fn(), &sgn_psi(), &[0.0], &opts).is_err());
    }

    #[test]
    fn clarke_examples() {
        let opts = ClarkeOptions::default();
        let quad: ScalarFn = Arc::new(|x: &[f64]| x[0] * x[0] + 3.0 * x[1] * x[1]);
        let grad = SSDerivative::from_rows(2, |x| vec![vec![2.0 * x[0], 6.0 * x[1]]]);
        assert!(clarke_containment(&quad, &grad, &[0.5, -1.0], &opts).unwrap().contained);

        let abs: ScalarFn = Arc::new(|x: &[f64]| x[0].abs());
        let kinked = SSDerivative::from_fn(1, 1, |x| {
            vec![DMatrix::from_element(1, 1, if x[0] >= 0.0 { 1.0 } else { -1.0 })]
        });
        let rep = clarke_containment(&abs, &kinked, &[0.0], &opts).unwrap();
        assert!(rep.contained, "{rep:?}");
        let zero = SSDerivative::constant(DMatrix::zeros(1, 1));
        assert!(!clarke_containment(&abs, &zero, &[0.0], &opts).unwrap().contained);
    }

    #[test]
    fn clarke_needs_enough_samples() {
        let abs: ScalarFn = Arc::new(|x: &[f64]| x[0].abs());
        let opts = ClarkeOptions {
            n_dirs: 3,
            ..ClarkeOptions::default()
        };
        assert!(matches!(
            clarke_containment(&abs, &sgn_psi(), &[0.0], &opts),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn singleton_fraction_extremes() {
        let opts = SingletonOptions::default();
        let one = SSDerivative::constant(DMatrix::from_element(1, 1, 2.0));
        assert_eq!(singleton_fraction(&one, &[-1.0], &[1.0], 200, &opts).unwrap(), 1.0);
        let two = SSDerivative::from_fn(1, 1, |_| {
            vec![DMatrix::from_element(1, 1, 0.0), DMatrix::from_element(1, 1, 1.0)]
        });
        assert_eq!(singleton_fraction(&two, &[-1.0], &[1.0], 200, &opts).unwrap(), 0.0);
    }

    #[test]
    fn affine_graph_has_zero_scd_ratio() {
        // F(x, y) = {2x − y}: graph {(x, y, 2x − y)}
        let l = Subspace::span(&[&[1.0, 0.0, 2.0], &[0.0, 1.0, -1.0]]).unwrap();
        let lstar = adjoint(&l, Split::new(2, 1)).unwrap();
        let map = ScdMapping::new(1, 1, move |_, _, _| vec![lstar.clone()]);
        let sampler = |c: &[f64], r: f64, count: usize, seed: u64| -> Vec<Vec<f64>> {
            shell_points(&c[..2], r / 2.0, count, seed)
                .into_iter()
                .map(|p| vec![p[0], p[1], 2.0 * p[0] - p[1]])
                .filter(|p| {
                    let d = dist(p, c);
                    d > r / 2.0 && d <= r
                })
                .collect()
        };
        let p = scd_ss_ratio(&map, &[0.5, 1.0, 0.0], &sampler, &RatioOptions::default()).unwrap();
        assert!(p.worst_ratio.iter().all(|r| *r < 1e-12), "{p:?}");
        assert!(p.pass);
    }

    #[test]
    fn empty_graph_shell_is_an_error() {
        let map = ScdMapping::new(1, 1, |_, _, _| vec![Subspace::span(&[&[0.0, 0.0, 1.0]]).unwrap()]);
        let none = |_: &[f64], _: f64, _: usize, _: u64| -> Vec<Vec<f64>> { Vec::new() };
        assert!(matches!(
            scd_ss_ratio(&map, &[0.0, 0.0, 0.0], &none, &RatioOptions::default()),
            Err(Error::EmptySample(_))
        ));
    }
}
