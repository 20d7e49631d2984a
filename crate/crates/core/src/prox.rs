//! Regularization penalties `g(·)` and their proximal operators
//! `prox_{g/ρ}(V) = argmin_U g(U) + (ρ/2)‖V − U‖²_F`.

use std::sync::Arc;

use nalgebra::SymmetricEigen;
use ndarray::{Array2, Axis};

use crate::error::{CmtfError, Result};
use crate::linalg::{bandwidth, to_nalgebra, BandedCholesky};

/// Slack used when deciding whether an iterate lies in an indicator's set.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Graph Laplacian used by the smoothness penalty.
#[derive(Debug, Clone, PartialEq)]
pub enum Laplacian {
    /// Path graph over the rows of whatever matrix the penalty is applied to.
    /// Lets one regularizer serve ragged slices of different lengths.
    Path,
    /// Explicit symmetric PSD matrix; must match the row count of the input.
    Matrix(Arc<Array2<f64>>),
}

impl Laplacian {
    fn materialize(&self, n: usize) -> Result<Array2<f64>> {
        match self {
            Laplacian::Path => build_path_laplacian(n),
            Laplacian::Matrix(l) => {
                if l.nrows() != n {
                    return Err(CmtfError::Dimension(format!(
                        "laplacian is {}x{}, input has {n} rows",
                        l.nrows(),
                        l.ncols()
                    )));
                }
                Ok(l.as_ref().clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    None,
    NonNegativity,
    /// `λ‖V‖²_F`
    Ridge { lambda: f64 },
    /// Every column inside the unit ℓ2 ball.
    UnitBallL2,
    /// Every column non-negative and inside the unit ℓ2 ball.
    NonNegUnitBallL2,
    /// `s · Σ_cols vᵀ L v`
    GraphLaplacianSmoothness { laplacian: Laplacian, strength: f64 },
}

impl Regularizer {
    pub fn ridge(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(CmtfError::InvalidArgument(format!(
                "ridge penalty must be >= 0, got {lambda}"
            )));
        }
        Ok(Regularizer::Ridge { lambda })
    }

    /// Smoothness along the row axis using a path-graph Laplacian.
    pub fn path_smoothness(strength: f64) -> Result<Self> {
        check_strength(strength)?;
        Ok(Regularizer::GraphLaplacianSmoothness {
            laplacian: Laplacian::Path,
            strength,
        })
    }

    /// Smoothness with an explicit Laplacian; checks symmetry and positive semidefiniteness.
    pub fn graph_smoothness(laplacian: Array2<f64>, strength: f64) -> Result<Self> {
        check_strength(strength)?;
        let n = laplacian.nrows();
        if laplacian.ncols() != n {
            return Err(CmtfError::InvalidArgument("laplacian must be square".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (laplacian[[i, j]] - laplacian[[j, i]]).abs() > 1e-10 {
                    return Err(CmtfError::InvalidArgument(format!(
                        "laplacian is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let eig = SymmetricEigen::new(to_nalgebra(laplacian.view()));
        let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if eig.eigenvalues.iter().any(|&v| v < -1e-10 * scale) {
            return Err(CmtfError::InvalidArgument(
                "laplacian is not positive semidefinite".into(),
            ));
        }
        Ok(Regularizer::GraphLaplacianSmoothness {
            laplacian: Laplacian::Matrix(Arc::new(laplacian)),
            strength,
        })
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Regularizer::None)
    }

    /// Whether every point of the penalty's domain is elementwise non-negative.
    pub fn implies_nonnegativity(&self) -> bool {
        matches!(self, Regularizer::NonNegativity | Regularizer::NonNegUnitBallL2)
    }

    /// Precomputes what the prox needs for a fixed `rho` and row count.
    pub fn prepare(&self, rho: f64, rows: usize) -> Result<PreparedProx<'_>> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(CmtfError::InvalidArgument(format!(
                "prox step must be positive, got {rho}"
            )));
        }
        let solver = match self {
            Regularizer::GraphLaplacianSmoothness { laplacian, strength } if *strength > 0.0 => {
                let scale = 2.0 * strength;
                Some(match laplacian {
                    Laplacian::Path => {
                        let degree = |i: usize| if i == 0 || i + 1 == rows { 1.0 } else { 2.0 };
                        if rows < 2 {
                            build_path_laplacian(rows)?;
                        }
                        BandedCholesky::from_band(rows, 1, |i, j| {
                            if i == j {
                                rho + scale * degree(i)
                            } else {
                                -scale
                            }
                        })?
                    }
                    Laplacian::Matrix(_) => {
                        let mut system = laplacian.materialize(rows)? * scale;
                        for i in 0..rows {
                            system[[i, i]] += rho;
                        }
                        let bw = bandwidth(&system);
                        BandedCholesky::new(&system, bw)?
                    }
                })
            }
            _ => None,
        };
        Ok(PreparedProx {
            reg: self,
            rho,
            solver,
        })
    }
}

fn check_strength(strength: f64) -> Result<()> {
    if !(strength >= 0.0) || !strength.is_finite() {
        return Err(CmtfError::InvalidArgument(format!(
            "smoothness strength must be >= 0, got {strength}"
        )));
    }
    Ok(())
}

/// A regularizer bound to a step size, with any factorization already done.
#[derive(Debug, Clone)]
pub struct PreparedProx<'a> {
    reg: &'a Regularizer,
    rho: f64,
    solver: Option<BandedCholesky>,
}

impl PreparedProx<'_> {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn apply(&self, v: &Array2<f64>) -> Result<Array2<f64>> {
        let rho = self.rho;
        let out = match self.reg {
            Regularizer::None => v.clone(),
            Regularizer::NonNegativity => v.mapv(|x| x.max(0.0)),
            Regularizer::Ridge { lambda } => v * (rho / (rho + 2.0 * lambda)),
            Regularizer::UnitBallL2 => {
                let mut u = v.clone();
                project_columns_to_ball(&mut u);
                u
            }
            Regularizer::NonNegUnitBallL2 => {
                let mut u = v.mapv(|x| x.max(0.0));
                project_columns_to_ball(&mut u);
                u
            }
            Regularizer::GraphLaplacianSmoothness { .. } => match &self.solver {
                None => v.clone(),
                Some(chol) => {
                    if chol.dim() != v.nrows() {
                        return Err(CmtfError::Dimension(format!(
                            "smoothness prox prepared for {} rows, got {}",
                            chol.dim(),
                            v.nrows()
                        )));
                    }
                    let mut u = Array2::zeros(v.raw_dim());
                    let mut buf = vec![0.0; v.nrows()];
                    for (mut dst, src) in u.axis_iter_mut(Axis(1)).zip(v.axis_iter(Axis(1))) {
                        for (b, s) in buf.iter_mut().zip(src.iter()) {
                            *b = rho * s;
                        }
                        chol.solve_in_place(&mut buf);
                        for (d, b) in dst.iter_mut().zip(&buf) {
                            *d = *b;
                        }
                    }
                    u
                }
            },
        };
        Ok(out)
    }
}

fn project_columns_to_ball(u: &mut Array2<f64>) {
    for mut col in u.axis_iter_mut(Axis(1)) {
        let norm = col.dot(&col).sqrt();
        if norm > 1.0 {
            col.mapv_inplace(|x| x / norm);
        }
    }
}

pub fn prox_apply(reg: &Regularizer, v: &Array2<f64>, rho: f64) -> Result<Array2<f64>> {
    reg.prepare(rho, v.nrows())?.apply(v)
}

/// `g(V)`; `+∞` when an indicator's constraint is violated beyond
/// [`FEASIBILITY_TOLERANCE`].
pub fn penalty_value(reg: &Regularizer, v: &Array2<f64>) -> f64 {
    let in_ball = |v: &Array2<f64>| {
        v.axis_iter(Axis(1))
            .all(|c| c.dot(&c).sqrt() <= 1.0 + FEASIBILITY_TOLERANCE)
    };
    let nonneg = |v: &Array2<f64>| v.iter().all(|&x| x >= -FEASIBILITY_TOLERANCE);
    let indicator = |ok: bool| if ok { 0.0 } else { f64::INFINITY };
    match reg {
        Regularizer::None => 0.0,
        Regularizer::NonNegativity => indicator(nonneg(v)),
        Regularizer::Ridge { lambda } => lambda * v.iter().map(|x| x * x).sum::<f64>(),
        Regularizer::UnitBallL2 => indicator(in_ball(v)),
        Regularizer::NonNegUnitBallL2 => indicator(nonneg(v) && in_ball(v)),
        Regularizer::GraphLaplacianSmoothness { laplacian, strength } => match laplacian {
            Laplacian::Path => {
                let mut total = 0.0;
                for col in v.axis_iter(Axis(1)) {
                    for i in 1..col.len() {
                        let d = col[i] - col[i - 1];
                        total += d * d;
                    }
                }
                strength * total
            }
            Laplacian::Matrix(l) => {
                if l.nrows() != v.nrows() {
                    return f64::NAN;
                }
                let lv = l.dot(v);
                strength * (&lv * v).sum()
            }
        },
    }
}

/// Laplacian (degree minus adjacency) of the path graph on `n` nodes.
pub fn build_path_laplacian(n: usize) -> Result<Array2<f64>> {
    if n < 2 {
        return Err(CmtfError::InvalidArgument(format!(
            "path laplacian needs n >= 2, got {n}"
        )));
    }
    let mut l = Array2::zeros((n, n));
    for i in 0..n - 1 {
        l[[i, i]] += 1.0;
        l[[i + 1, i + 1]] += 1.0;
        l[[i, i + 1]] = -1.0;
        l[[i + 1, i]] = -1.0;
    }
    Ok(l)
}
