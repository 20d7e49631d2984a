mod common;

use cmtf_core::coupling::{selected_columns, CouplingSpec, DictionaryVariable};
use cmtf_core::metrics::{fit_percentage, fms};
use cmtf_core::prox::Regularizer;
use cmtf_core::solver::{
    admm_bk_mode, admm_c_mode, admm_coupled_first_mode, admm_mode, fit, project_parafac2, BModeState, CoupledBlock,
    Dataset, ModeState, ProblemSpec, SolverConfig, TerminationReason,
};
use cmtf_core::synthgen::{add_noise, gen_parafac2_bks};
use cmtf_core::tensor::{DataTensor, Decomposition, MatrixDecomposition, Parafac2Decomposition};
use ndarray::Array2;
use proptest::prelude::*;

use common::{frob, normal, rng, uniform};

fn spd(r: usize, g: &mut impl rand::Rng) -> Array2<f64> {
    let m = normal(r + 3, r, g);
    m.t().dot(&m)
}

/// `‖U·S − rhs‖ / ‖rhs‖` with `S = G + diag(extra)`.
fn solve_residual(u: &Array2<f64>, gram: &Array2<f64>, extra: &[f64], rhs: &Array2<f64>) -> f64 {
    let mut s = gram.clone();
    for (i, e) in extra.iter().enumerate() {
        s[[i, i]] += e;
    }
    frob(&(u.dot(&s) - rhs)) / frob(rhs)
}

/// `Σ (Z − μ)` over the splits.
fn split_sum(state: &ModeState) -> Array2<f64> {
    let mut out = Array2::zeros(state.factor.raw_dim());
    for s in &state.splits {
        out = out + &s.z - &s.mu;
    }
    out
}

fn noisy_splits(state: &mut ModeState, g: &mut impl rand::Rng) {
    for s in state.splits.iter_mut() {
        s.z = normal(s.z.nrows(), s.z.ncols(), g);
        s.mu = normal(s.mu.nrows(), s.mu.ncols(), g) * 0.1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_orthonormal_with_equal_cross_products(
        widths in prop::collection::vec(3usize..9, 1..7), r in 1usize..4, seed in any::<u64>(),
    ) {
        let mut g = rng(seed);
        let m: Vec<Array2<f64>> = widths.iter().map(|&j| normal(j, r, &mut g)).collect();
        let proj = project_parafac2(&m, 5).unwrap();
        for p in &proj.projections {
            prop_assert!(frob(&(p.t().dot(p) - Array2::<f64>::eye(r))) <= 1e-8);
        }
        let slices = proj.slices();
        let reference = slices[0].t().dot(&slices[0]);
        for s in &slices[1..] {
            prop_assert!(frob(&(s.t().dot(s) - &reference)) <= 1e-10 * frob(&reference).max(1.0));
        }
    }

    #[test]
    fn uncoupled_mode_solve_satisfies_its_system(r in 1usize..5, rows in 2usize..8, nregs in 0usize..3, seed in any::<u64>()) {
        let mut g = rng(seed);
        let gram = spd(r, &mut g);
        let data = normal(rows, r, &mut g);
        let regs = vec![Regularizer::NonNegativity, Regularizer::ridge(0.3).unwrap()][..nregs].to_vec();
        let mut state = ModeState::new(normal(rows, r, &mut g), &regs);
        noisy_splits(&mut state, &mut g);
        state.rho = 0.5 + gram.diag().sum() / r as f64;
        let rhs = &data + &(split_sum(&state) * (0.5 * state.rho));
        let extra = vec![0.5 * state.rho * nregs as f64; r];
        admm_mode(&mut state, &gram, &data, 1).unwrap();
        prop_assert!(solve_residual(&state.factor, &gram, &extra, &rhs) <= 1e-8);
        prop_assert!(state.is_finite());
    }

    #[test]
    fn coupled_first_mode_solves_satisfy_their_systems(seed in any::<u64>(), r in 2usize..4) {
        let mut g = rng(seed);
        let rows = 6;
        let spec = CouplingSpec::column_selection(
            vec![0, 1],
            vec![(0..r).map(Some).collect(), (0..r).map(|c| (c > 0).then_some(c)).collect()],
            r,
        ).unwrap();
        let grams = [spd(r, &mut g), spd(r, &mut g)];
        let data = [normal(rows, r, &mut g), normal(rows, r, &mut g)];
        let mut states = [
            ModeState::new(normal(rows, r, &mut g), &[Regularizer::UnitBallL2]),
            ModeState::new(normal(rows, r, &mut g), &[]),
        ];
        noisy_splits(&mut states[0], &mut g);
        states[0].rho = 1.7;
        states[1].rho = 0.6;
        let mut dict = DictionaryVariable::initialize(&spec, &[states[0].factor.view(), states[1].factor.view()]).unwrap();
        dict.duals = vec![normal(rows, r, &mut g) * 0.1, normal(rows, r, &mut g) * 0.1];
        let (old_delta, old_duals) = (dict.delta.clone(), dict.duals.clone());
        let expected: Vec<(Array2<f64>, Vec<f64>)> = (0..2).map(|p| {
            let s = &states[p];
            let half = 0.5 * s.rho;
            let rhs = &data[p] + &(split_sum(s) * half) + &(selected_columns(&spec, p, &old_delta, r) * half) - &(&old_duals[p] * half);
            let extra = spec.selector(p).iter().map(|c| half * (s.splits.len() as f64 + f64::from(u8::from(c.is_some())))).collect();
            (rhs, extra)
        }).collect();
        let [s0, s1] = &mut states;
        let mut blocks = vec![
            CoupledBlock { state: s0, gram: grams[0].clone(), data_term: data[0].clone() },
            CoupledBlock { state: s1, gram: grams[1].clone(), data_term: data[1].clone() },
        ];
        admm_coupled_first_mode(&mut blocks, &spec, &mut dict, 1).unwrap();
        for (p, (rhs, extra)) in expected.iter().enumerate() {
            prop_assert!(solve_residual(&blocks[p].state.factor, &grams[p], extra, rhs) <= 1e-8);
        }
        prop_assert!(dict.duals.iter().chain([&dict.delta]).all(|m| m.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn c_rows_solve_their_systems(seed in any::<u64>(), k in 1usize..6) {
        let mut g = rng(seed);
        let r = 3;
        let grams: Vec<Array2<f64>> = (0..k).map(|_| spd(r, &mut g)).collect();
        let data = normal(k, r, &mut g);
        let mut state = ModeState::new(uniform(k, r, &mut g), &[Regularizer::NonNegativity]);
        noisy_splits(&mut state, &mut g);
        state.rho = 2.0;
        let rhs = &data + &(split_sum(&state) * 1.0);
        admm_c_mode(&mut state, &grams, &data, 1).unwrap();
        for row in 0..k {
            let u = state.factor.row(row).insert_axis(ndarray::Axis(0)).to_owned();
            let b = rhs.row(row).insert_axis(ndarray::Axis(0)).to_owned();
            prop_assert!(solve_residual(&u, &grams[row], &[1.0; 3], &b) <= 1e-8);
        }
    }

    #[test]
    fn b_slices_solve_their_systems(seed in any::<u64>(), k in 1usize..5) {
        let mut g = rng(seed);
        let r = 2;
        let b: Vec<Array2<f64>> = (0..k).map(|i| normal(4 + i, r, &mut g)).collect();
        let mut state = BModeState::new(b, &[Regularizer::path_smoothness(1.0).unwrap()], 5).unwrap();
        for s in state.slices.iter_mut() {
            noisy_splits(s, &mut g);
            s.rho = 0.3 + rand::Rng::random::<f64>(&mut g);
        }
        for d in state.duals.iter_mut() {
            *d = normal(d.nrows(), r, &mut g) * 0.1;
        }
        let grams: Vec<Array2<f64>> = (0..k).map(|_| spd(r, &mut g)).collect();
        let data: Vec<Array2<f64>> = state.slices.iter().map(|s| normal(s.factor.nrows(), r, &mut g)).collect();
        let feasible = state.projection.slices();
        let expected: Vec<(Array2<f64>, f64)> = (0..k).map(|i| {
            let s = &state.slices[i];
            let half = 0.5 * s.rho;
            (&data[i] + &(split_sum(s) * half) + &(&feasible[i] * half) - &(&state.duals[i] * half), half * 2.0)
        }).collect();
        admm_bk_mode(&mut state, &grams, &data, 1, 5).unwrap();
        for (i, (rhs, extra)) in expected.iter().enumerate() {
            prop_assert!(solve_residual(&state.slices[i].factor, &grams[i], &[*extra; 2], rhs) <= 1e-8);
            prop_assert!(state.duals[i].iter().all(|v| v.is_finite()));
        }
    }
}

/// A noisy coupled PARAFAC2 and matrix pair with non-negative shared mode.
fn coupled_instance(seed: u64, eta: f64) -> (ProblemSpec, Parafac2Decomposition) {
    let mut g = rng(seed);
    let r = 2;
    let a = uniform(12, r, &mut g);
    let b = gen_parafac2_bks(8, 6, r, &mut g).unwrap();
    let c = uniform(6, r, &mut g) + 0.2;
    let truth = Parafac2Decomposition::new(a.clone(), b, c).unwrap();
    let x = add_noise(&Decomposition::Parafac2(truth.clone()).reconstruct().unwrap(), eta, &mut g).unwrap();
    let y = MatrixDecomposition::new(a, normal(9, r, &mut g)).unwrap().reconstruct();
    let y = add_noise(&DataTensor::Matrix(y), eta, &mut g).unwrap();
    let problem = ProblemSpec {
        datasets: vec![
            Dataset::new("X", x, r, 0.5).with_regularizer(0, Regularizer::NonNegativity),
            Dataset::new("Y", y, r, 0.5).with_regularizer(0, Regularizer::NonNegativity),
        ],
        coupling: Some(CouplingSpec::exact(vec![0, 1], r).unwrap()),
    };
    (problem, truth)
}

fn parafac2(dec: &Decomposition) -> &Parafac2Decomposition {
    match dec {
        Decomposition::Parafac2(d) => d,
        _ => panic!("expected a PARAFAC2 model"),
    }
}

#[test]
fn objective_never_ends_above_its_start() {
    let config = SolverConfig {
        max_outer_iterations: 200,
        ..SolverConfig::default()
    };
    for seed in 0..20 {
        let (problem, _) = coupled_instance(seed, 0.2);
        let result = fit(&problem, &config, seed).unwrap();
        let (first, last) = (result.objective_trace[0], result.final_objective());
        assert!(last <= first, "seed {seed}: {first} -> {last}");
        assert!(result.objective_trace.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn converged_fits_are_feasible() {
    let mut converged = 0;
    for seed in 0..6 {
        let (problem, _) = coupled_instance(100 + seed, 0.05);
        let result = fit(&problem, &SolverConfig::default(), seed).unwrap();
        if result.termination != TerminationReason::RelativeTolerance {
            continue;
        }
        converged += 1;
        assert!(result.feasibility.max() <= 1e-4, "{:?}", result.feasibility);
        let delta = result.dictionary.as_ref().unwrap();
        for dec in &result.decompositions {
            let f = dec.first_mode();
            assert!(frob(&(f - delta)) / frob(f).max(1.0) <= 1e-4);
            assert!(f.iter().all(|&v| v >= -1e-4));
        }
        let b = &parafac2(&result.decompositions[0]).b;
        let grams: Vec<Array2<f64>> = b.iter().map(|bk| bk.t().dot(bk)).collect();
        let mean = grams.iter().map(frob).sum::<f64>() / grams.len() as f64;
        for gk in &grams {
            assert!(frob(&(gk - &grams[0])) / mean <= 1e-4);
        }
    }
    assert!(converged >= 3, "only {converged} of 6 fits converged");
}

#[test]
fn unregularized_parafac2_recovers_noiseless_data() {
    let mut g = rng(9);
    let r = 3;
    let truth = Parafac2Decomposition::new(
        normal(15, r, &mut g),
        gen_parafac2_bks(10, 8, r, &mut g).unwrap(),
        uniform(8, r, &mut g) + 0.5,
    )
    .unwrap();
    let x = Decomposition::Parafac2(truth).reconstruct().unwrap();
    let problem = ProblemSpec {
        datasets: vec![Dataset::new("X", x.clone(), r, 1.0)],
        coupling: None,
    };
    let config = SolverConfig {
        initializations: 3,
        ..SolverConfig::default()
    };
    let result = cmtf_core::solver::multi_init_fit(&problem, &config).unwrap();
    let fitp = fit_percentage(&x, &result.decompositions[0].reconstruct().unwrap()).unwrap();
    assert!(fitp >= 99.9, "fit {fitp}");
}

#[test]
fn doubling_both_weights_keeps_the_solution() {
    let (problem, _) = coupled_instance(42, 0.1);
    let mut doubled = problem.clone();
    for ds in doubled.datasets.iter_mut() {
        ds.weight *= 2.0;
    }
    let config = SolverConfig::default();
    let base = fit(&problem, &config, 3).unwrap();
    let scaled = fit(&doubled, &config, 3).unwrap();
    for (d0, d1) in base.decompositions.iter().zip(&scaled.decompositions) {
        let f = fms(d0.first_mode().view(), d1.first_mode().view()).unwrap();
        assert!((1.0 - f).abs() <= 1e-6, "{f}");
    }
    let (b0, b1) = (parafac2(&base.decompositions[0]), parafac2(&scaled.decompositions[0]));
    assert!((1.0 - fms(b0.stacked_b().view(), b1.stacked_b().view()).unwrap()).abs() <= 1e-6);
    assert!((1.0 - fms(b0.c.view(), b1.c.view()).unwrap()).abs() <= 1e-6);
}
