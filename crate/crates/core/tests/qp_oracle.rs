use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use semismooth::bundle::simplex_qp;

fn value(g: &DMatrix<f64>, alpha: &[f64], t: f64, lambda: &[f64]) -> f64 {
    let agg = g * DVector::from_column_slice(lambda);
    0.5 * t * agg.norm_squared() + alpha.iter().zip(lambda).map(|(a, l)| a * l).sum::<f64>()
}

/// Exact minimum by solving the KKT system of every face of the simplex.
fn face_enumeration(g: &DMatrix<f64>, alpha: &[f64], t: f64) -> f64 {
    let k = g.ncols();
    let q = t * g.transpose() * g;
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << k) {
        let s: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let r = s.len();
        let mut kkt = DMatrix::zeros(r + 1, r + 1);
        let mut rhs = DVector::zeros(r + 1);
        for (a, &i) in s.iter().enumerate() {
            for (b, &j) in s.iter().enumerate() {
                kkt[(a, b)] = q[(i, j)];
            }
            kkt[(a, r)] = -1.0;
            kkt[(r, a)] = 1.0;
            rhs[a] = -alpha[i];
        }
        rhs[r] = 1.0;
        let Ok(sol) = kkt.svd(true, true).solve(&rhs, 1e-14) else { continue };
        if (0..r).any(|a| sol[a] < -1e-12) {
            continue;
        }
        let mut lambda = vec![0.0; k];
        for (a, &i) in s.iter().enumerate() {
            lambda[i] = sol[a].max(0.0);
        }
        let total: f64 = lambda.iter().sum();
        lambda.iter_mut().for_each(|l| *l /= total);
        best = best.min(value(g, alpha, t, &lambda));
    }
    best
}

fn grid_search(g: &DMatrix<f64>, alpha: &[f64], t: f64, steps: usize) -> f64 {
    let k = g.ncols();
    let mut best = f64::INFINITY;
    match k {
        1 => best = value(g, alpha, t, &[1.0]),
        2 => {
            for i in 0..=steps {
                let a = i as f64 / steps as f64;
                best = best.min(value(g, alpha, t, &[a, 1.0 - a]));
            }
        }
        _ => {
            for i in 0..=steps {
                for j in 0..=steps - i {
                    let (a, b) = (i as f64 / steps as f64, j as f64 / steps as f64);
                    best = best.min(value(g, alpha, t, &[a, b, (1.0 - a - b).max(0.0)]));
                }
            }
        }
    }
    best
}

fn instance() -> impl Strategy<Value = (DMatrix<f64>, Vec<f64>, f64)> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec(-2.0f64..2.0, n * k),
            prop::collection::vec(0.0f64..1.0, k),
            0.1f64..10.0,
        )
            .prop_map(move |(gv, alpha, t)| (DMatrix::from_column_slice(n, k, &gv), alpha, t))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_exact_face_enumeration((g, alpha, t) in instance()) {
        let sol = simplex_qp(&g, &alpha, t).unwrap();
        let exact = face_enumeration(&g, &alpha, t);
        prop_assert!((sol.objective - exact).abs() <= 1e-8, "qp {} exact {}", sol.objective, exact);
        prop_assert!((sol.lambda.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(sol.lambda.iter().all(|l| *l >= 0.0));
    }

    #[test]
    fn never_worse_than_grid((g, alpha, t) in instance()) {
        let sol = simplex_qp(&g, &alpha, t).unwrap();
        prop_assert!(sol.objective <= grid_search(&g, &alpha, t, 200) + 1e-8);
    }

    #[test]
    fn step_is_minus_t_times_aggregate((g, alpha, t) in instance()) {
        let sol = simplex_qp(&g, &alpha, t).unwrap();
        let agg = &g * DVector::from_column_slice(&sol.lambda);
        for (d, a) in sol.d.iter().zip(agg.iter()) {
            prop_assert!((d + t * a).abs() < 1e-12);
        }
    }
}
