//! Per-mode ADMM solvers used inside the alternating outer loop.
//!
//! Every mode minimizes `w‖data − model‖²` in one factor, which after
//! expansion is the quadratic `tr(U G Uᵀ) − 2 tr(U Tᵀ)` with a weighted Gram
//! matrix `G` and data term `T`. Regularizers are attached through split
//! variables `Z = prox(U + μ)`; a factor with no regularizer has no split.
//! Augmented terms carry weight `ρ/2`, so a column touched by `m` splits
//! adds `(ρ/2)·m` to the diagonal of its system matrix.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::coupling::{delta_update, selected_columns, CouplingSpec, DictionaryVariable};
use crate::error::{CmtfError, Result};
use crate::linalg::{all_finite, Cholesky};
use crate::prox::{PreparedProx, Regularizer};

use super::projection::{project_parafac2_weighted, Parafac2Projection};

/// Lower bound applied to every step size.
pub const MIN_STEP_SIZE: f64 = 1e-12;

/// `ρ = trace(G)/R`, floored at [`MIN_STEP_SIZE`].
pub fn compute_step_size(gram: &Array2<f64>) -> f64 {
    let r = gram.nrows().max(1);
    let rho = gram.diag().sum() / r as f64;
    if rho.is_finite() {
        rho.max(MIN_STEP_SIZE)
    } else {
        MIN_STEP_SIZE
    }
}

/// A regularizer's split variable and its scaled dual.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub z: Array2<f64>,
    pub mu: Array2<f64>,
}

/// One factor matrix with its splits. `regs[i]` belongs to `splits[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub factor: Array2<f64>,
    pub regs: Vec<Regularizer>,
    pub splits: Vec<Split>,
    pub rho: f64,
}

impl ModeState {
    /// Splits start as copies of the factor with zero duals. `None`
    /// regularizers are dropped.
    pub fn new(factor: Array2<f64>, regs: &[Regularizer]) -> Self {
        let regs: Vec<Regularizer> = regs.iter().filter(|r| !r.is_none()).cloned().collect();
        let splits = regs
            .iter()
            .map(|_| Split {
                z: factor.clone(),
                mu: Array2::zeros(factor.raw_dim()),
            })
            .collect();
        Self {
            factor,
            regs,
            splits,
            rho: 1.0,
        }
    }

    /// Adds `(ρ/2) Σ (Z − μ)` to `rhs`.
    fn add_split_terms(splits: &[Split], rho: f64, rhs: &mut Array2<f64>) {
        let half = 0.5 * rho;
        for s in splits {
            rhs.scaled_add(half, &s.z);
            rhs.scaled_add(-half, &s.mu);
        }
    }

    fn update_splits(splits: &mut [Split], proxes: &[PreparedProx<'_>], factor: &Array2<f64>) -> Result<()> {
        for (s, p) in splits.iter_mut().zip(proxes) {
            s.z = p.apply(&(factor + &s.mu))?;
            s.mu += factor;
            s.mu -= &s.z;
        }
        Ok(())
    }

    /// Largest `‖U − Z‖_F / ‖U‖_F` over the splits.
    pub fn split_residual(&self) -> f64 {
        let norm = self.factor.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        self.splits
            .iter()
            .map(|s| {
                (&self.factor - &s.z).iter().map(|v| v * v).sum::<f64>().sqrt() / norm
            })
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.factor) && self.splits.iter().all(|s| all_finite(&s.z) && all_finite(&s.mu))
    }

    fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(CmtfError::NonFinite(what.into()))
        }
    }
}

fn prepare_all(regs: &[Regularizer], rho: f64, rows: usize) -> Result<Vec<PreparedProx<'_>>> {
    regs.iter().map(|r| r.prepare(rho, rows)).collect()
}

fn system_matrix(gram: &Array2<f64>, diag_extra: &[f64]) -> Array2<f64> {
    let mut s = gram.clone();
    for (i, e) in diag_extra.iter().enumerate() {
        s[[i, i]] += e;
    }
    s
}

/// Uncoupled mode: solves `U[G + (ρ/2)mI] = T + (ρ/2)Σ(Z − μ)`, then
/// prox and dual steps, for `inner` iterations. With no splits this is a
/// single exact least-squares solve.
pub fn admm_mode(state: &mut ModeState, gram: &Array2<f64>, data_term: &Array2<f64>, inner: usize) -> Result<()> {
    let r = gram.nrows();
    if data_term.ncols() != r || state.factor.dim() != data_term.dim() {
        return Err(CmtfError::Dimension(format!(
            "mode update: gram {r}x{r}, data term {:?}, factor {:?}",
            data_term.dim(),
            state.factor.dim()
        )));
    }
    let extra = vec![0.5 * state.rho * state.splits.len() as f64; r];
    let chol = Cholesky::new(system_matrix(gram, &extra).view())?;
    if state.splits.is_empty() {
        state.factor = chol.solve_right(data_term);
        return state.ensure_finite("mode update");
    }
    let proxes = prepare_all(&state.regs, state.rho, state.factor.nrows())?;
    for _ in 0..inner {
        let mut rhs = data_term.clone();
        ModeState::add_split_terms(&state.splits, state.rho, &mut rhs);
        state.factor = chol.solve_right(&rhs);
        ModeState::update_splits(&mut state.splits, &proxes, &state.factor)?;
    }
    drop(proxes);
    state.ensure_finite("mode update")
}

/// A first-mode factor taking part in a joint (possibly coupled) update.
pub struct CoupledBlock<'a> {
    pub state: &'a mut ModeState,
    pub gram: Array2<f64>,
    pub data_term: Array2<f64>,
}

/// Joint ADMM over the coupled first-mode factors: per-participant linear
/// solves, the dictionary update, prox steps on the splits, then dual ascent
/// for both the regularizer splits and the coupling.
///
/// `blocks[p]` must correspond to participant `p` of `coupling`.
pub fn admm_coupled_first_mode(
    blocks: &mut [CoupledBlock<'_>],
    coupling: &CouplingSpec,
    dict: &mut DictionaryVariable,
    inner: usize,
) -> Result<()> {
    if blocks.len() != coupling.participants().len() || dict.duals.len() != blocks.len() {
        return Err(CmtfError::Dimension(format!(
            "{} blocks, {} participants, {} coupling duals",
            blocks.len(),
            coupling.participants().len(),
            dict.duals.len()
        )));
    }
    let selectors: Vec<Vec<Option<usize>>> = (0..blocks.len()).map(|p| coupling.selector(p)).collect();
    let mut chols = Vec::with_capacity(blocks.len());
    for (p, b) in blocks.iter().enumerate() {
        let r = b.gram.nrows();
        if selectors[p].len() != r || b.state.factor.ncols() != r || b.data_term.dim() != b.state.factor.dim() {
            return Err(CmtfError::Dimension(format!("participant {p} shapes do not conform")));
        }
        let half = 0.5 * b.state.rho;
        let splits = b.state.splits.len() as f64;
        let extra: Vec<f64> = selectors[p]
            .iter()
            .map(|c| half * (splits + if c.is_some() { 1.0 } else { 0.0 }))
            .collect();
        chols.push(Cholesky::new(system_matrix(&b.gram, &extra).view())?);
    }
    let rhos: Vec<f64> = blocks.iter().map(|b| b.state.rho).collect();
    let masks: Vec<Array1<f64>> = selectors
        .iter()
        .map(|sel| sel.iter().map(|c| if c.is_some() { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..inner {
        for (p, b) in blocks.iter_mut().enumerate() {
            let cols = b.state.factor.ncols();
            let mut rhs = b.data_term.clone();
            ModeState::add_split_terms(&b.state.splits, b.state.rho, &mut rhs);
            let half = 0.5 * b.state.rho;
            rhs.scaled_add(half, &selected_columns(coupling, p, &dict.delta, cols));
            rhs.scaled_add(-half, &dict.duals[p]);
            b.state.factor = chols[p].solve_right(&rhs);
        }

        let inputs: Vec<(ArrayView2<'_, f64>, ArrayView2<'_, f64>)> = blocks
            .iter()
            .zip(&dict.duals)
            .map(|(b, mu)| (b.state.factor.view(), mu.view()))
            .collect();
        dict.delta = delta_update(coupling, &inputs, &rhos)?;

        for (p, b) in blocks.iter_mut().enumerate() {
            let state = &mut *b.state;
            let proxes = prepare_all(&state.regs, state.rho, state.factor.nrows())?;
            ModeState::update_splits(&mut state.splits, &proxes, &state.factor)?;
            let view = selected_columns(coupling, p, &dict.delta, state.factor.ncols());
            let step = (&state.factor - &view) * &masks[p];
            dict.duals[p] += &step;
        }
    }
    for (p, b) in blocks.iter().enumerate() {
        b.state.ensure_finite("coupled first mode")?;
        if !all_finite(&dict.duals[p]) {
            return Err(CmtfError::NonFinite("coupling dual".into()));
        }
    }
    if !all_finite(&dict.delta) {
        return Err(CmtfError::NonFinite("coupling dictionary".into()));
    }
    Ok(())
}

/// Rowwise update of the PARAFAC2 coefficient matrix `C`: row `k` solves
/// `c_k[G_k + (ρ/2)mI] = t_k + (ρ/2)Σ(z_k − μ_k)`; prox and dual steps act
/// on the whole matrix.
pub fn admm_c_mode(state: &mut ModeState, grams: &[Array2<f64>], data_rows: &Array2<f64>, inner: usize) -> Result<()> {
    let (k_count, r) = state.factor.dim();
    if grams.len() != k_count || data_rows.dim() != (k_count, r) {
        return Err(CmtfError::Dimension(format!(
            "C update: {} grams and data {:?} for factor {:?}",
            grams.len(),
            data_rows.dim(),
            state.factor.dim()
        )));
    }
    let extra = vec![0.5 * state.rho * state.splits.len() as f64; r];
    let chols: Vec<Cholesky> = grams
        .iter()
        .map(|g| Cholesky::new(system_matrix(g, &extra).view()))
        .collect::<Result<_>>()?;
    let solve_rows = |rhs: &Array2<f64>| {
        let mut out = rhs.clone();
        for (k, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let mut buf = row.to_vec();
            chols[k].solve_in_place(&mut buf);
            row.assign(&Array1::from(buf));
        }
        out
    };
    if state.splits.is_empty() {
        state.factor = solve_rows(data_rows);
        return state.ensure_finite("C update");
    }
    let proxes = prepare_all(&state.regs, state.rho, state.factor.nrows())?;
    for _ in 0..inner {
        let mut rhs = data_rows.clone();
        ModeState::add_split_terms(&state.splits, state.rho, &mut rhs);
        state.factor = solve_rows(&rhs);
        ModeState::update_splits(&mut state.splits, &proxes, &state.factor)?;
    }
    drop(proxes);
    state.ensure_finite("C update")
}

/// The `B_k` factors of a PARAFAC2 model together with the constraint split
/// `{P_k ΔB}` and its duals. Each slice carries its own step size.
#[derive(Debug, Clone, PartialEq)]
pub struct BModeState {
    pub slices: Vec<ModeState>,
    pub projection: Parafac2Projection,
    pub duals: Vec<Array2<f64>>,
}

impl BModeState {
    /// Starts the constraint split at the projection of the initial `B_k`.
    pub fn new(b: Vec<Array2<f64>>, regs: &[Regularizer], projection_iters: usize) -> Result<Self> {
        let projection = project_parafac2_weighted(&b, &vec![1.0; b.len()], projection_iters, None)?;
        let duals = b.iter().map(|bk| Array2::zeros(bk.raw_dim())).collect();
        let slices = b.into_iter().map(|bk| ModeState::new(bk, regs)).collect();
        Ok(Self {
            slices,
            projection,
            duals,
        })
    }

    pub fn factors(&self) -> Vec<Array2<f64>> {
        self.slices.iter().map(|s| s.factor.clone()).collect()
    }

    /// `sqrt(Σ‖B_k − P_kΔB‖²) / sqrt(Σ‖B_k‖²)`.
    pub fn constraint_residual(&self) -> f64 {
        let mut diff = 0.0;
        let mut norm = 0.0;
        for (k, s) in self.slices.iter().enumerate() {
            let feasible = self.projection.slice(k);
            diff += (&s.factor - &feasible).iter().map(|v| v * v).sum::<f64>();
            norm += s.factor.iter().map(|v| v * v).sum::<f64>();
        }
        diff.sqrt() / norm.sqrt().max(f64::MIN_POSITIVE)
    }
}

/// `B_k` update: per-slice solves
/// `B_k[G_k + (ρ_k/2)(m+1)I] = T_k + (ρ_k/2)(Σ(Z − μ) + P_kΔB − μ_Δ,k)`,
/// prox steps, the PARAFAC2 projection of `{B_k + μ_Δ,k}`, then dual steps.
pub fn admm_bk_mode(
    state: &mut BModeState,
    grams: &[Array2<f64>],
    data_terms: &[Array2<f64>],
    inner: usize,
    projection_iters: usize,
) -> Result<()> {
    let k_count = state.slices.len();
    if grams.len() != k_count || data_terms.len() != k_count {
        return Err(CmtfError::Dimension(format!(
            "B update: {} grams and {} data terms for {k_count} slices",
            grams.len(),
            data_terms.len()
        )));
    }
    let mut chols = Vec::with_capacity(k_count);
    for (k, s) in state.slices.iter().enumerate() {
        if data_terms[k].dim() != s.factor.dim() {
            return Err(CmtfError::Dimension(format!("B_{k} data term does not match factor")));
        }
        let r = s.factor.ncols();
        let extra = vec![0.5 * s.rho * (s.splits.len() + 1) as f64; r];
        chols.push(Cholesky::new(system_matrix(&grams[k], &extra).view())?);
    }
    let proxes: Vec<Vec<PreparedProx<'_>>> = state
        .slices
        .iter()
        .map(|s| prepare_all(&s.regs, s.rho, s.factor.nrows()))
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = state.slices.iter().map(|s| s.rho).collect();

    // `proxes` borrows the slice regularizers, so work on copies and write back.
    let mut factors: Vec<Array2<f64>> = state.slices.iter().map(|s| s.factor.clone()).collect();
    let mut splits: Vec<Vec<Split>> = state.slices.iter().map(|s| s.splits.clone()).collect();

    let mut feasible = state.projection.slices();
    for _ in 0..inner {
        for k in 0..k_count {
            let rho = weights[k];
            let half = 0.5 * rho;
            let mut rhs = data_terms[k].clone();
            ModeState::add_split_terms(&splits[k], rho, &mut rhs);
            rhs.scaled_add(half, &feasible[k]);
            rhs.scaled_add(-half, &state.duals[k]);
            factors[k] = chols[k].solve_right(&rhs);
            ModeState::update_splits(&mut splits[k], &proxes[k], &factors[k])?;
        }
        let targets: Vec<Array2<f64>> = factors.iter().zip(&state.duals).map(|(b, mu)| b + mu).collect();
        state.projection = project_parafac2_weighted(
            &targets,
            &weights,
            projection_iters,
            Some(&state.projection.delta_b),
        )?;
        feasible = state.projection.slices();
        for k in 0..k_count {
            state.duals[k] += &factors[k];
            state.duals[k] -= &feasible[k];
        }
    }
    drop(proxes);
    for ((s, f), sp) in state.slices.iter_mut().zip(factors).zip(splits) {
        s.factor = f;
        s.splits = sp;
        s.ensure_finite("B update")?;
    }
    if state.duals.iter().any(|d| !all_finite(d)) {
        return Err(CmtfError::NonFinite("PARAFAC2 constraint dual".into()));
    }
    Ok(())
}
