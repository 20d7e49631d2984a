mod common;

use cmtf_core::prox::{build_path_laplacian, prox_apply, Regularizer};
use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use proptest::prelude::*;

use common::{frob, max_abs_diff, normal, rng};

/// Penalty evaluated from its definition; indicators are checked by the
/// caller constructing feasible points.
fn smooth_penalty(lap: &Array2<f64>, strength: f64, u: &Array2<f64>) -> f64 {
    strength * (&lap.dot(u) * u).sum()
}

fn prox_objective(g: f64, u: &Array2<f64>, v: &Array2<f64>, rho: f64) -> f64 {
    g + 0.5 * rho * frob(&(v - u)).powi(2)
}

fn clip_nonneg(u: &mut Array2<f64>) {
    u.mapv_inplace(|x| x.max(0.0));
}

fn clip_ball(u: &mut Array2<f64>) {
    for mut c in u.axis_iter_mut(Axis(1)) {
        let n = c.dot(&c).sqrt();
        if n > 1.0 {
            c /= n;
        }
    }
}

fn feasible(reg: &Regularizer, u: &Array2<f64>) -> bool {
    let nonneg = u.iter().all(|&x| x >= 0.0);
    let ball = u.axis_iter(Axis(1)).all(|c| c.dot(&c).sqrt() <= 1.0 + 1e-12);
    match reg {
        Regularizer::NonNegativity => nonneg,
        Regularizer::UnitBallL2 => ball,
        Regularizer::NonNegUnitBallL2 => nonneg && ball,
        _ => true,
    }
}

/// Random feasible point near `u`.
fn perturb(reg: &Regularizer, u: &Array2<f64>, eps: f64, seed: u64) -> Array2<f64> {
    let mut p = u + &(normal(u.nrows(), u.ncols(), &mut rng(seed)) * eps);
    match reg {
        Regularizer::NonNegativity => clip_nonneg(&mut p),
        Regularizer::UnitBallL2 => clip_ball(&mut p),
        Regularizer::NonNegUnitBallL2 => {
            clip_nonneg(&mut p);
            clip_ball(&mut p);
        }
        _ => {}
    }
    p
}

fn regularizer(kind: usize, param: f64) -> Regularizer {
    match kind {
        0 => Regularizer::NonNegativity,
        1 => Regularizer::ridge(param).unwrap(),
        2 => Regularizer::UnitBallL2,
        3 => Regularizer::NonNegUnitBallL2,
        _ => Regularizer::path_smoothness(param).unwrap(),
    }
}

fn penalty(reg: &Regularizer, u: &Array2<f64>) -> f64 {
    match reg {
        Regularizer::Ridge { lambda } => lambda * frob(u).powi(2),
        Regularizer::GraphLaplacianSmoothness { strength, .. } => {
            smooth_penalty(&build_path_laplacian(u.nrows()).unwrap(), *strength, u)
        }
        _ => 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prox_beats_feasible_perturbations(
        kind in 0usize..5,
        rows in 2usize..9,
        cols in 1usize..4,
        param in 0.05f64..5.0,
        rho in 0.05f64..20.0,
        scale in 0.1f64..3.0,
        seed in any::<u64>(),
    ) {
        let reg = regularizer(kind, param);
        let v = normal(rows, cols, &mut rng(seed)) * scale;
        let u = prox_apply(&reg, &v, rho).unwrap();
        prop_assert!(u.iter().all(|x| x.is_finite()));
        prop_assert!(feasible(&reg, &u));
        let best = prox_objective(penalty(&reg, &u), &u, &v, rho);
        for i in 0..100u64 {
            let eps = 10f64.powi(-((i % 4) as i32) - 1);
            let other = perturb(&reg, &u, eps, seed ^ (i + 1).wrapping_mul(0x9E37_79B9));
            prop_assert!(feasible(&reg, &other));
            let value = prox_objective(penalty(&reg, &other), &other, &v, rho);
            prop_assert!(best <= value + 1e-10 * (1.0 + value.abs()), "{best} > {value}");
        }
    }

    #[test]
    fn indicator_proxes_are_idempotent(kind in prop::sample::select(vec![0usize, 2, 3]), rho in 0.1f64..10.0, seed in any::<u64>()) {
        let reg = regularizer(kind, 1.0);
        let v = normal(6, 3, &mut rng(seed)) * 2.0;
        let once = prox_apply(&reg, &v, rho).unwrap();
        let twice = prox_apply(&reg, &once, rho).unwrap();
        prop_assert!(max_abs_diff(&once, &twice) <= 1e-14);
    }

    #[test]
    fn ridge_and_smoothness_proxes_are_linear(
        kind in prop::sample::select(vec![1usize, 4]),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        rho in 0.1f64..10.0,
        seed in any::<u64>(),
    ) {
        let reg = regularizer(kind, 0.7);
        let mut r = rng(seed);
        let v = normal(7, 2, &mut r);
        let w = normal(7, 2, &mut r);
        let combined = prox_apply(&reg, &(&v * a + &w * b), rho).unwrap();
        let separate = prox_apply(&reg, &v, rho).unwrap() * a + prox_apply(&reg, &w, rho).unwrap() * b;
        prop_assert!(max_abs_diff(&combined, &separate) <= 1e-12);
    }

    #[test]
    fn path_smoothness_matches_dense_solve(rows in 2usize..40, strength in 0.01f64..10.0, rho in 0.01f64..10.0, seed in any::<u64>()) {
        let v = normal(rows, 3, &mut rng(seed));
        let u = prox_apply(&Regularizer::path_smoothness(strength).unwrap(), &v, rho).unwrap();
        let lap = build_path_laplacian(rows).unwrap();
        let system = DMatrix::from_fn(rows, rows, |i, j| rho * f64::from(u8::from(i == j)) + 2.0 * strength * lap[[i, j]]);
        let rhs = DMatrix::from_fn(rows, 3, |i, j| rho * v[[i, j]]);
        let expected = system.lu().solve(&rhs).unwrap();
        for i in 0..rows {
            for j in 0..3 {
                prop_assert!((u[[i, j]] - expected[(i, j)]).abs() <= 1e-10 * (1.0 + expected[(i, j)].abs()));
            }
        }
    }

    #[test]
    fn matrix_laplacian_agrees_with_path(rows in 2usize..20, strength in 0.1f64..5.0, seed in any::<u64>()) {
        let v = normal(rows, 2, &mut rng(seed));
        let path = prox_apply(&Regularizer::path_smoothness(strength).unwrap(), &v, 1.3).unwrap();
        let lap = build_path_laplacian(rows).unwrap();
        let graph = prox_apply(&Regularizer::graph_smoothness(lap, strength).unwrap(), &v, 1.3).unwrap();
        prop_assert!(max_abs_diff(&path, &graph) <= 1e-12);
    }

    #[test]
    fn proxes_stay_finite_on_large_input(kind in 0usize..5, seed in any::<u64>()) {
        let v = normal(5, 2, &mut rng(seed)) * 1e150;
        let u = prox_apply(&regularizer(kind, 1.0), &v, 1e-6).unwrap();
        prop_assert!(u.iter().all(|x| x.is_finite()));
    }
}

#[test]
fn path_laplacian_has_ones_in_null_space() {
    for n in 2..12 {
        let l = build_path_laplacian(n).unwrap();
        assert!(l.sum_axis(Axis(1)).iter().all(|x| x.abs() < 1e-15));
    }
}
