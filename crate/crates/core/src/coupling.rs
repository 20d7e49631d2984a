//! Linear couplings of first-mode factors through a shared generating
//! variable `Δ` (the "dictionary"): either every participant equals `Δ`
//! exactly, or each participant's columns are a selection of `Δ`'s columns.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{CmtfError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingKind {
    /// Every participant factor equals `Δ`.
    Exact,
    /// `selectors[p][j] = Some(c)` ties column `j` of participant `p` to
    /// column `c` of `Δ`; `None` leaves the column uncoupled.
    ColumnSelection { selectors: Vec<Vec<Option<usize>>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    participants: Vec<usize>,
    kind: CouplingKind,
    delta_cols: usize,
}

impl CouplingSpec {
    /// Exact coupling of the first modes of the listed datasets.
    pub fn exact(participants: Vec<usize>, delta_cols: usize) -> Result<Self> {
        let spec = Self {
            participants,
            kind: CouplingKind::Exact,
            delta_cols,
        };
        spec.check_structure()?;
        Ok(spec)
    }

    pub fn column_selection(
        participants: Vec<usize>,
        selectors: Vec<Vec<Option<usize>>>,
        delta_cols: usize,
    ) -> Result<Self> {
        if selectors.len() != participants.len() {
            return Err(CmtfError::Validation(format!(
                "{} selectors for {} participants",
                selectors.len(),
                participants.len()
            )));
        }
        let spec = Self {
            participants,
            kind: CouplingKind::ColumnSelection { selectors },
            delta_cols,
        };
        spec.check_structure()?;
        Ok(spec)
    }

    fn check_structure(&self) -> Result<()> {
        if self.participants.is_empty() {
            return Err(CmtfError::Validation("coupling needs at least one participant".into()));
        }
        if self.delta_cols == 0 {
            return Err(CmtfError::Validation("coupling dictionary needs >= 1 column".into()));
        }
        let mut seen = self.participants.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.participants.len() {
            return Err(CmtfError::Validation("a dataset appears twice in the coupling".into()));
        }
        if let CouplingKind::ColumnSelection { selectors } = &self.kind {
            let mut covered = vec![false; self.delta_cols];
            for (p, sel) in selectors.iter().enumerate() {
                let mut used = vec![false; self.delta_cols];
                for &c in sel.iter().flatten() {
                    if c >= self.delta_cols {
                        return Err(CmtfError::Validation(format!(
                            "participant {p} selects dictionary column {c}, only {} exist",
                            self.delta_cols
                        )));
                    }
                    if used[c] {
                        return Err(CmtfError::Validation(format!(
                            "participant {p} selects dictionary column {c} twice"
                        )));
                    }
                    used[c] = true;
                    covered[c] = true;
                }
            }
            if let Some(c) = covered.iter().position(|c| !c) {
                return Err(CmtfError::Validation(format!(
                    "dictionary column {c} is not selected by any participant"
                )));
            }
        }
        Ok(())
    }

    /// Checks the participants' factor column counts against the coupling.
    pub fn validate_ranks(&self, ranks: &[usize]) -> Result<()> {
        if ranks.len() != self.participants.len() {
            return Err(CmtfError::Validation("rank list does not match participants".into()));
        }
        for (p, &r) in ranks.iter().enumerate() {
            match &self.kind {
                CouplingKind::Exact if r != self.delta_cols => {
                    return Err(CmtfError::Validation(format!(
                        "exact coupling needs rank {} for participant {p}, got {r}",
                        self.delta_cols
                    )));
                }
                CouplingKind::ColumnSelection { selectors } if selectors[p].len() != r => {
                    return Err(CmtfError::Validation(format!(
                        "selector of participant {p} has {} entries, factor has {r} columns",
                        selectors[p].len()
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn participants(&self) -> &[usize] {
        &self.participants
    }

    pub fn kind(&self) -> &CouplingKind {
        &self.kind
    }

    pub fn delta_cols(&self) -> usize {
        self.delta_cols
    }

    /// Position of `dataset` in the participant list.
    pub fn position(&self, dataset: usize) -> Option<usize> {
        self.participants.iter().position(|&d| d == dataset)
    }

    /// Column map of participant `p` (by position in the participant list).
    pub fn selector(&self, p: usize) -> Vec<Option<usize>> {
        match &self.kind {
            CouplingKind::Exact => (0..self.delta_cols).map(Some).collect(),
            CouplingKind::ColumnSelection { selectors } => selectors[p].clone(),
        }
    }
}

/// The dictionary `Δ` and the per-participant coupling duals `μ_Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryVariable {
    pub delta: Array2<f64>,
    pub duals: Vec<Array2<f64>>,
}

impl DictionaryVariable {
    /// `Δ` set to the mean of the participants' selected columns; zero duals.
    pub fn initialize(spec: &CouplingSpec, factors: &[ArrayView2<'_, f64>]) -> Result<Self> {
        let zeros: Vec<Array2<f64>> = factors.iter().map(|f| Array2::zeros(f.raw_dim())).collect();
        let inputs: Vec<_> = factors
            .iter()
            .zip(&zeros)
            .map(|(f, z)| (f.view(), z.view()))
            .collect();
        let rhos = vec![1.0; factors.len()];
        let delta = delta_update(spec, &inputs, &rhos)?;
        Ok(Self { delta, duals: zeros })
    }
}

/// Minimizer of `Σ_p (ρ_p/2)‖(F_p + μ_p)[:, j] − Δ[:, sel_p(j)]‖²` over `Δ`:
/// every dictionary column is the ρ-weighted mean of the participant columns
/// mapped onto it.
pub fn delta_update(
    spec: &CouplingSpec,
    inputs: &[(ArrayView2<'_, f64>, ArrayView2<'_, f64>)],
    rhos: &[f64],
) -> Result<Array2<f64>> {
    if inputs.is_empty() {
        return Err(CmtfError::InvalidArgument("delta update with no participants".into()));
    }
    if inputs.len() != spec.participants.len() || rhos.len() != inputs.len() {
        return Err(CmtfError::Dimension(format!(
            "{} inputs and {} step sizes for {} participants",
            inputs.len(),
            rhos.len(),
            spec.participants.len()
        )));
    }
    let rows = inputs[0].0.nrows();
    let mut num = Array2::<f64>::zeros((rows, spec.delta_cols));
    let mut den = vec![0.0; spec.delta_cols];
    for (p, ((factor, dual), &rho)) in inputs.iter().zip(rhos).enumerate() {
        if factor.dim() != dual.dim() || factor.nrows() != rows {
            return Err(CmtfError::Dimension(format!(
                "participant {p}: factor {:?}, dual {:?}, expected {rows} rows",
                factor.dim(),
                dual.dim()
            )));
        }
        if !(rho > 0.0) {
            return Err(CmtfError::InvalidArgument(format!("step size {rho} for participant {p}")));
        }
        let sel = spec.selector(p);
        if sel.len() != factor.ncols() {
            return Err(CmtfError::Dimension(format!(
                "participant {p} has {} columns, selector has {}",
                factor.ncols(),
                sel.len()
            )));
        }
        for (j, c) in sel.iter().enumerate() {
            let Some(c) = *c else { continue };
            let mut dst = num.column_mut(c);
            dst.scaled_add(rho, &factor.column(j));
            dst.scaled_add(rho, &dual.column(j));
            den[c] += rho;
        }
    }
    for (c, mut col) in num.axis_iter_mut(Axis(1)).enumerate() {
        if den[c] == 0.0 {
            return Err(CmtfError::Validation(format!(
                "dictionary column {c} has no contributing participant"
            )));
        }
        col /= den[c];
    }
    Ok(num)
}

/// `Δ` viewed through participant `p`'s selector, shaped like its factor.
/// Uncoupled columns are zero.
pub fn selected_columns(spec: &CouplingSpec, p: usize, delta: &Array2<f64>, cols: usize) -> Array2<f64> {
    let mut out = Array2::zeros((delta.nrows(), cols));
    for (j, c) in spec.selector(p).iter().enumerate() {
        if let Some(c) = *c {
            out.column_mut(j).assign(&delta.column(c));
        }
    }
    out
}

/// `‖factor − selected Δ columns‖_F / max(1, ‖factor‖_F)` over the coupled columns.
pub fn coupling_residual(
    spec: &CouplingSpec,
    p: usize,
    factor: &Array2<f64>,
    delta: &Array2<f64>,
) -> Result<f64> {
    if p >= spec.participants.len() {
        return Err(CmtfError::InvalidArgument(format!("no participant {p}")));
    }
    let sel = spec.selector(p);
    if factor.nrows() != delta.nrows() || sel.len() != factor.ncols() || delta.ncols() != spec.delta_cols {
        return Err(CmtfError::Dimension(format!(
            "factor {:?} does not match dictionary {:?} under the selector",
            factor.dim(),
            delta.dim()
        )));
    }
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (j, c) in sel.iter().enumerate() {
        let col = factor.column(j);
        norm += col.dot(&col);
        if let Some(c) = *c {
            diff += col
                .iter()
                .zip(delta.column(c).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
    }
    Ok(diff.sqrt() / norm.sqrt().max(1.0))
}
