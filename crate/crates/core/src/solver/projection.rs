//! Projection onto the constant cross-product set: find orthonormal `P_k`
//! and a shared `ΔB` so that `P_k ΔB` is close to each `M_k`. Alternates an
//! orthogonal Procrustes step per slice with a (weighted) average for `ΔB`.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::error::{CmtfError, Result};
use crate::linalg::{dot_thin, from_nalgebra, gram, polar_factor, to_nalgebra};

/// Below this ratio of extreme eigenvalues of `NᵀN` the Gram-based polar
/// factor loses orthonormality and the explicit SVD is used instead.
const GRAM_POLAR_CONDITION: f64 = 1e-8;

/// Output of [`project_parafac2`].
#[derive(Debug, Clone, PartialEq)]
pub struct Parafac2Projection {
    pub projections: Vec<Array2<f64>>,
    pub delta_b: Array2<f64>,
}

impl Parafac2Projection {
    /// `P_k ΔB`, the feasible point for slice `k`.
    pub fn slice(&self, k: usize) -> Array2<f64> {
        dot_thin(self.projections[k].view(), self.delta_b.view())
    }

    /// `P_k ΔB` for every slice.
    pub fn slices(&self) -> Vec<Array2<f64>> {
        (0..self.projections.len()).map(|k| self.slice(k)).collect()
    }
}

/// Equal-weight projection starting from `ΔB = I`.
pub fn project_parafac2(m: &[Array2<f64>], iters: usize) -> Result<Parafac2Projection> {
    let weights = vec![1.0; m.len()];
    project_parafac2_weighted(m, &weights, iters, None)
}

/// Projection with per-slice weights (the slices' ADMM step sizes) and an
/// optional warm start for `ΔB`.
pub fn project_parafac2_weighted(
    m: &[Array2<f64>],
    weights: &[f64],
    iters: usize,
    warm_start: Option<&Array2<f64>>,
) -> Result<Parafac2Projection> {
    let Some(first) = m.first() else {
        return Err(CmtfError::InvalidArgument("projection of an empty slice list".into()));
    };
    if iters == 0 {
        return Err(CmtfError::InvalidArgument("projection needs >= 1 iteration".into()));
    }
    if weights.len() != m.len() || weights.iter().any(|w| !(*w > 0.0)) {
        return Err(CmtfError::InvalidArgument("projection weights must be positive, one per slice".into()));
    }
    let r = first.ncols();
    for (k, mk) in m.iter().enumerate() {
        if mk.ncols() != r {
            return Err(CmtfError::Dimension(format!("slice {k} has {} columns, expected {r}", mk.ncols())));
        }
        if mk.nrows() < r {
            return Err(CmtfError::Dimension(format!(
                "slice {k} has {} rows, fewer than the rank {r}",
                mk.nrows()
            )));
        }
    }
    let total_weight: f64 = weights.iter().sum();
    let grams: Vec<DMatrix<f64>> = m.iter().map(|mk| to_nalgebra(gram(mk.view()).view())).collect();
    let mut delta = match warm_start {
        Some(d) if d.dim() == (r, r) => to_nalgebra(d.view()),
        _ => DMatrix::identity(r, r),
    };

    let mut projections: Vec<Array2<f64>> = Vec::new();
    for round in 0..iters {
        let last = round + 1 == iters;
        let mut next = DMatrix::zeros(r, r);
        if last {
            projections.clear();
        }
        for (k, mk) in m.iter().enumerate() {
            // Polar factor of N = M ΔBᵀ expressed through NᵀN = ΔB (MᵀM) ΔBᵀ,
            // so only R×R work is needed unless P_k itself is requested.
            let ntn = &delta * &grams[k] * delta.transpose();
            let eig = SymmetricEigen::new(ntn);
            let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            let well_conditioned = max > 0.0 && min > GRAM_POLAR_CONDITION * max;
            let ptm = if well_conditioned {
                let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
                let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
                if last {
                    let right = from_nalgebra(&(delta.transpose() * &w));
                    projections.push(dot_thin(mk.view(), right.view()));
                }
                &w * &delta * &grams[k]
            } else {
                let n = dot_thin(mk.view(), from_nalgebra(&delta.transpose()).view());
                let p = polar_factor(n.view())?;
                let ptm = to_nalgebra(crate::linalg::t_dot_thin(p.view(), mk.view()).view());
                if last {
                    projections.push(p);
                }
                ptm
            };
            next += ptm * weights[k];
        }
        delta = next / total_weight;
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(CmtfError::NonFinite("parafac2 projection".into()));
        }
    }
    Ok(Parafac2Projection {
        projections,
        delta_b: from_nalgebra(&delta),
    })
}

/// `max_{k1,k2} ‖B_{k1}ᵀB_{k1} − B_{k2}ᵀB_{k2}‖_F`.
pub fn cross_product_spread(b: &[Array2<f64>]) -> f64 {
    let grams: Vec<Array2<f64>> = b.iter().map(|bk| gram(bk.view())).collect();
    let mut spread = 0.0f64;
    for i in 0..grams.len() {
        for j in i + 1..grams.len() {
            let d = (&grams[i] - &grams[j]).iter().map(|v| v * v).sum::<f64>().sqrt();
            spread = spread.max(d);
        }
    }
    spread
}

/// [`cross_product_spread`] divided by the mean `‖B_kᵀB_k‖_F`.
pub fn relative_cross_product_spread(b: &[Array2<f64>]) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    let mean = b
        .iter()
        .map(|bk| gram(bk.view()).iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum::<f64>()
        / b.len() as f64;
    if mean == 0.0 {
        return 0.0;
    }
    cross_product_spread(b) / mean
}
