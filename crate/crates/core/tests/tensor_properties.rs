mod common;

use cmtf_core::tensor::{
    mttkrp, normalize_to_unit_norm, reconstruct_cp, reconstruct_parafac2, CpDecomposition, DenseTensor3,
    FrobeniusNorm, Parafac2Decomposition, RaggedTensor,
};
use ndarray::{Array2, Array3};
use proptest::prelude::*;

use common::{normal, rng};

fn naive_mttkrp(x: &Array3<f64>, f: &[Array2<f64>; 3], mode: usize) -> Array2<f64> {
    let (ni, nj, nk) = x.dim();
    let r = f[0].ncols();
    let mut out = Array2::zeros((f[mode].nrows(), r));
    for i in 0..ni {
        for j in 0..nj {
            for k in 0..nk {
                for c in 0..r {
                    let v = x[[i, j, k]];
                    match mode {
                        0 => out[[i, c]] += v * f[1][[j, c]] * f[2][[k, c]],
                        1 => out[[j, c]] += v * f[0][[i, c]] * f[2][[k, c]],
                        _ => out[[k, c]] += v * f[0][[i, c]] * f[1][[j, c]],
                    }
                }
            }
        }
    }
    out
}

fn random_parafac2(rows: usize, widths: &[usize], r: usize, seed: u64) -> Parafac2Decomposition {
    let mut g = rng(seed);
    let a = normal(rows, r, &mut g);
    let b = widths.iter().map(|&j| normal(j, r, &mut g)).collect();
    let c = normal(widths.len(), r, &mut g);
    Parafac2Decomposition::new(a, b, c).unwrap()
}

proptest! {
    #[test]
    fn mttkrp_matches_triple_loop(
        ni in 1usize..4, nj in 1usize..4, nk in 1usize..4, r in 1usize..4, mode in 0usize..3, seed in any::<u64>(),
    ) {
        let mut g = rng(seed);
        let x = Array3::from_shape_vec((ni, nj, nk), normal(1, ni * nj * nk, &mut g).into_raw_vec_and_offset().0).unwrap();
        let f = [normal(ni, r, &mut g), normal(nj, r, &mut g), normal(nk, r, &mut g)];
        let got = mttkrp(&DenseTensor3::new(x.clone()).unwrap(), &CpDecomposition::new(f.clone()).unwrap(), mode).unwrap();
        let want = naive_mttkrp(&x, &f, mode);
        prop_assert!(got.iter().zip(&want).all(|(a, b)| (a - b).abs() <= 1e-12));
    }

    #[test]
    fn parafac2_slices_have_declared_shapes(rows in 1usize..6, widths in prop::collection::vec(2usize..7, 1..5), seed in any::<u64>()) {
        let dec = random_parafac2(rows, &widths, 2, seed);
        let x = reconstruct_parafac2(&dec).unwrap();
        for (k, s) in x.slices().iter().enumerate() {
            prop_assert_eq!(s.dim(), (rows, widths[k]));
        }
    }

    #[test]
    fn reconstruction_norm_ignores_column_order(seed in any::<u64>(), shift in 1usize..3) {
        let dec = random_parafac2(5, &[3, 4, 5, 3], 3, seed);
        let perm = |m: &Array2<f64>| Array2::from_shape_fn(m.dim(), |(i, c)| m[[i, (c + shift) % 3]]);
        let moved = Parafac2Decomposition::new(perm(&dec.a), dec.b.iter().map(perm).collect(), perm(&dec.c)).unwrap();
        let n0 = reconstruct_parafac2(&dec).unwrap().frob_norm();
        let n1 = reconstruct_parafac2(&moved).unwrap().frob_norm();
        prop_assert!((n0 - n1).abs() <= 1e-12 * n0.max(1.0));
    }

    #[test]
    fn normalization_gives_unit_norm(seed in any::<u64>(), scale in 1e-3f64..1e3) {
        let mut g = rng(seed);
        let x = RaggedTensor::new(vec![normal(4, 3, &mut g) * scale, normal(4, 6, &mut g) * scale]).unwrap();
        let (unit, norm) = normalize_to_unit_norm(&x).unwrap();
        prop_assert!((unit.frob_norm() - 1.0).abs() <= 1e-12);
        prop_assert!((norm - x.frob_norm()).abs() <= 1e-12 * norm);
    }
}

#[test]
fn cp_reconstruction_matches_sum_of_outer_products() {
    let mut g = rng(4);
    let f = [normal(3, 2, &mut g), normal(4, 2, &mut g), normal(2, 2, &mut g)];
    let x = reconstruct_cp(&CpDecomposition::new(f.clone()).unwrap()).unwrap();
    for ((i, j, k), v) in x.data().indexed_iter() {
        let want: f64 = (0..2).map(|c| f[0][[i, c]] * f[1][[j, c]] * f[2][[k, c]]).sum();
        assert!((v - want).abs() < 1e-13);
    }
}

#[test]
fn mismatched_parafac2_factors_are_rejected() {
    let mut g = rng(1);
    let bad = Parafac2Decomposition::new(normal(4, 2, &mut g), vec![normal(3, 3, &mut g)], normal(1, 2, &mut g));
    assert!(bad.is_err());
}
