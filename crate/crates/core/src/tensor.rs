//! Containers for ragged and dense third-order tensors and for the PARAFAC2,
//! CP and matrix decompositions, plus reconstruction and norm primitives.

use ndarray::{s, Array2, Array3, ArrayView2, Axis, Zip};

use crate::error::{CmtfError, Result};

/// Third-order tensor stored as frontal slices `X_k` of shape `I1 × J_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RaggedTensor {
    slices: Vec<Array2<f64>>,
}

impl RaggedTensor {
    pub fn new(slices: Vec<Array2<f64>>) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Err(CmtfError::Dimension("ragged tensor needs at least one slice".into()));
        };
        let rows = first.nrows();
        if rows == 0 {
            return Err(CmtfError::Dimension("ragged tensor slices need I1 >= 1".into()));
        }
        for (k, x) in slices.iter().enumerate() {
            if x.nrows() != rows {
                return Err(CmtfError::Dimension(format!(
                    "slice {k} has {} rows, expected {rows}",
                    x.nrows()
                )));
            }
            if x.ncols() == 0 {
                return Err(CmtfError::Dimension(format!("slice {k} has no columns")));
            }
        }
        Ok(Self { slices })
    }

    pub fn slices(&self) -> &[Array2<f64>] {
        &self.slices
    }

    pub fn slice(&self, k: usize) -> &Array2<f64> {
        &self.slices[k]
    }

    pub fn n_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn n_rows(&self) -> usize {
        self.slices[0].nrows()
    }

    pub fn slice_widths(&self) -> Vec<usize> {
        self.slices.iter().map(|x| x.ncols()).collect()
    }

    pub fn map_slices(&self, f: impl Fn(&Array2<f64>) -> Array2<f64>) -> Self {
        Self {
            slices: self.slices.iter().map(f).collect(),
        }
    }

    pub fn into_slices(self) -> Vec<Array2<f64>> {
        self.slices
    }
}

/// Dense `I × J × K` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    data: Array3<f64>,
}

impl DenseTensor3 {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        if data.shape().iter().any(|&d| d == 0) {
            return Err(CmtfError::Dimension(format!(
                "dense tensor dimensions must be positive, got {:?}",
                data.shape()
            )));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn shape(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[0], s[1], s[2]]
    }

    /// Mode-1 unfolding `I × (J·K)`, column index `j + k·J`.
    pub fn unfold_mode1(&self) -> Array2<f64> {
        let [i, j, k] = self.shape();
        Array2::from_shape_fn((i, j * k), |(a, col)| self.data[[a, col % j, col / j]])
    }

    pub fn fold_mode1(unfolded: &Array2<f64>, shape: [usize; 3]) -> Result<Self> {
        let [i, j, k] = shape;
        if unfolded.dim() != (i, j * k) {
            return Err(CmtfError::Dimension(format!(
                "unfolding of shape {:?} does not match tensor shape {shape:?}",
                unfolded.dim()
            )));
        }
        Self::new(Array3::from_shape_fn((i, j, k), |(a, b, c)| {
            unfolded[[a, b + c * j]]
        }))
    }
}

/// `X_k ≈ A · Diag(C[k, :]) · B_kᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parafac2Decomposition {
    pub a: Array2<f64>,
    pub b: Vec<Array2<f64>>,
    /// Row `k` holds the diagonal of `D_k`.
    pub c: Array2<f64>,
}

impl Parafac2Decomposition {
    pub fn new(a: Array2<f64>, b: Vec<Array2<f64>>, c: Array2<f64>) -> Result<Self> {
        let dec = Self { a, b, c };
        dec.validate()?;
        Ok(dec)
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.a.ncols();
        if self.c.ncols() != r {
            return Err(CmtfError::Dimension(format!(
                "C has {} columns, A has {r}",
                self.c.ncols()
            )));
        }
        if self.b.len() != self.c.nrows() {
            return Err(CmtfError::Dimension(format!(
                "{} B_k matrices but C has {} rows",
                self.b.len(),
                self.c.nrows()
            )));
        }
        for (k, bk) in self.b.iter().enumerate() {
            if bk.ncols() != r {
                return Err(CmtfError::Dimension(format!(
                    "B_{k} has {} columns, A has {r}",
                    bk.ncols()
                )));
            }
        }
        Ok(())
    }

    /// All `B_k` stacked vertically into a `(Σ J_k) × R` matrix.
    pub fn stacked_b(&self) -> Array2<f64> {
        let views: Vec<ArrayView2<'_, f64>> = self.b.iter().map(|b| b.view()).collect();
        ndarray::concatenate(Axis(0), &views).expect("B_k share column count")
    }

    /// Slice `k` of the reconstruction.
    pub fn reconstruct_slice(&self, k: usize) -> Array2<f64> {
        let ad = &self.a * &self.c.row(k);
        ad.dot(&self.b[k].t())
    }
}

/// `Y ≈ E Fᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDecomposition {
    pub e: Array2<f64>,
    pub f: Array2<f64>,
}

impl MatrixDecomposition {
    pub fn new(e: Array2<f64>, f: Array2<f64>) -> Result<Self> {
        if e.ncols() != f.ncols() {
            return Err(CmtfError::Dimension(format!(
                "E has {} columns, F has {}",
                e.ncols(),
                f.ncols()
            )));
        }
        Ok(Self { e, f })
    }

    pub fn rank(&self) -> usize {
        self.e.ncols()
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        self.e.dot(&self.f.t())
    }
}

/// Three-way CP model `⟦E, F, G⟧`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpDecomposition {
    pub factors: [Array2<f64>; 3],
}

impl CpDecomposition {
    pub fn new(factors: [Array2<f64>; 3]) -> Result<Self> {
        let r = factors[0].ncols();
        if factors.iter().any(|f| f.ncols() != r) {
            return Err(CmtfError::Dimension(format!(
                "CP factors have column counts {:?}",
                factors.iter().map(|f| f.ncols()).collect::<Vec<_>>()
            )));
        }
        Ok(Self { factors })
    }

    pub fn rank(&self) -> usize {
        self.factors[0].ncols()
    }

    fn check(&self) -> Result<()> {
        let r = self.factors[0].ncols();
        if self.factors.iter().any(|f| f.ncols() != r) {
            return Err(CmtfError::Dimension("CP factors have unequal column counts".into()));
        }
        Ok(())
    }
}

pub fn reconstruct_parafac2(dec: &Parafac2Decomposition) -> Result<RaggedTensor> {
    dec.validate()?;
    RaggedTensor::new((0..dec.b.len()).map(|k| dec.reconstruct_slice(k)).collect())
}

pub fn reconstruct_cp(dec: &CpDecomposition) -> Result<DenseTensor3> {
    dec.check()?;
    let [e, f, g] = &dec.factors;
    let (ni, nj, nk) = (e.nrows(), f.nrows(), g.nrows());
    let mut out = Array3::<f64>::zeros((ni, nj, nk));
    for k in 0..nk {
        let eg = e * &g.row(k);
        let slab = eg.dot(&f.t());
        out.slice_mut(s![.., .., k]).assign(&slab);
    }
    DenseTensor3::new(out)
}

/// Matricized tensor times Khatri-Rao product along `mode`: row `i` of the
/// result is `Σ` over the other two indices of `X[..]` times the matching
/// rows of the other two factors.
pub fn mttkrp(tensor: &DenseTensor3, factors: &CpDecomposition, mode: usize) -> Result<Array2<f64>> {
    if mode > 2 {
        return Err(CmtfError::InvalidArgument(format!("mode {mode} out of range for a 3-way tensor")));
    }
    factors.check()?;
    let shape = tensor.shape();
    for (m, f) in factors.factors.iter().enumerate() {
        if f.nrows() != shape[m] {
            return Err(CmtfError::Dimension(format!(
                "factor {m} has {} rows, tensor mode {m} has size {}",
                f.nrows(),
                shape[m]
            )));
        }
    }
    let r = factors.rank();
    let [e, f, g] = &factors.factors;
    let x = tensor.data();
    let mut out = Array2::<f64>::zeros((shape[mode], r));
    match mode {
        0 => {
            for k in 0..shape[2] {
                let xf = x.slice(s![.., .., k]).dot(f);
                out.scaled_add(1.0, &(xf * &g.row(k)));
            }
        }
        1 => {
            for k in 0..shape[2] {
                let xe = x.slice(s![.., .., k]).t().dot(e);
                out.scaled_add(1.0, &(xe * &g.row(k)));
            }
        }
        _ => {
            for k in 0..shape[2] {
                let xe = x.slice(s![.., .., k]).t().dot(e);
                let mut row = out.row_mut(k);
                Zip::from(&mut row)
                    .and(xe.axis_iter(Axis(1)))
                    .and(f.axis_iter(Axis(1)))
                    .for_each(|o, a, b| *o = a.dot(&b));
            }
        }
    }
    Ok(out)
}

/// Frobenius norm over all entries (all slices for ragged tensors).
pub trait FrobeniusNorm {
    fn squared_norm(&self) -> f64;

    fn frob_norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }
}

impl FrobeniusNorm for Array2<f64> {
    fn squared_norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum()
    }
}

impl FrobeniusNorm for ArrayView2<'_, f64> {
    fn squared_norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum()
    }
}

impl FrobeniusNorm for Array3<f64> {
    fn squared_norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum()
    }
}

impl FrobeniusNorm for DenseTensor3 {
    fn squared_norm(&self) -> f64 {
        self.data.squared_norm()
    }
}

impl FrobeniusNorm for RaggedTensor {
    fn squared_norm(&self) -> f64 {
        self.slices.iter().map(|x| x.squared_norm()).sum()
    }
}

/// Data whose entries can all be multiplied by a scalar.
pub trait Scale: Sized {
    fn scaled(&self, factor: f64) -> Self;
}

impl Scale for Array2<f64> {
    fn scaled(&self, factor: f64) -> Self {
        self * factor
    }
}

impl Scale for DenseTensor3 {
    fn scaled(&self, factor: f64) -> Self {
        Self {
            data: &self.data * factor,
        }
    }
}

impl Scale for RaggedTensor {
    fn scaled(&self, factor: f64) -> Self {
        self.map_slices(|x| x * factor)
    }
}

/// Rescales `x` to unit Frobenius norm; returns the scaled data and the original norm.
pub fn normalize_to_unit_norm<T: FrobeniusNorm + Scale>(x: &T) -> Result<(T, f64)> {
    let norm = x.frob_norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(CmtfError::InvalidArgument(format!(
            "cannot normalize data with norm {norm}"
        )));
    }
    Ok((x.scaled(1.0 / norm), norm))
}

/// Any of the three dataset layouts the solver can fit.
#[derive(Debug, Clone, PartialEq)]
pub enum DataTensor {
    Ragged(RaggedTensor),
    Dense(DenseTensor3),
    Matrix(Array2<f64>),
}

impl FrobeniusNorm for DataTensor {
    fn squared_norm(&self) -> f64 {
        match self {
            DataTensor::Ragged(x) => x.squared_norm(),
            DataTensor::Dense(x) => x.squared_norm(),
            DataTensor::Matrix(x) => x.squared_norm(),
        }
    }
}

impl Scale for DataTensor {
    fn scaled(&self, factor: f64) -> Self {
        match self {
            DataTensor::Ragged(x) => DataTensor::Ragged(x.scaled(factor)),
            DataTensor::Dense(x) => DataTensor::Dense(x.scaled(factor)),
            DataTensor::Matrix(x) => DataTensor::Matrix(x.scaled(factor)),
        }
    }
}

/// A fitted (or ground-truth) model for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum Decomposition {
    Parafac2(Parafac2Decomposition),
    Cp(CpDecomposition),
    Matrix(MatrixDecomposition),
}

impl Decomposition {
    /// The factor of the first (shareable) mode: `A` for PARAFAC2, `E` otherwise.
    pub fn first_mode(&self) -> &Array2<f64> {
        match self {
            Decomposition::Parafac2(d) => &d.a,
            Decomposition::Cp(d) => &d.factors[0],
            Decomposition::Matrix(d) => &d.e,
        }
    }

    pub fn rank(&self) -> usize {
        self.first_mode().ncols()
    }

    pub fn reconstruct(&self) -> Result<DataTensor> {
        Ok(match self {
            Decomposition::Parafac2(d) => DataTensor::Ragged(reconstruct_parafac2(d)?),
            Decomposition::Cp(d) => DataTensor::Dense(reconstruct_cp(d)?),
            Decomposition::Matrix(d) => DataTensor::Matrix(d.reconstruct()),
        })
    }

    /// `‖data − reconstruction‖²_F`.
    pub fn squared_residual(&self, data: &DataTensor) -> Result<f64> {
        match (self, data) {
            (Decomposition::Parafac2(d), DataTensor::Ragged(x)) => {
                d.validate()?;
                if d.b.len() != x.n_slices() || d.a.nrows() != x.n_rows() {
                    return Err(CmtfError::Dimension("PARAFAC2 model does not match data".into()));
                }
                let mut total = 0.0;
                for (k, xk) in x.slices().iter().enumerate() {
                    if d.b[k].nrows() != xk.ncols() {
                        return Err(CmtfError::Dimension(format!(
                            "B_{k} has {} rows, slice has {} columns",
                            d.b[k].nrows(),
                            xk.ncols()
                        )));
                    }
                    let rec = d.reconstruct_slice(k);
                    total += Zip::from(xk).and(&rec).fold(0.0, |acc, a, b| acc + (a - b) * (a - b));
                }
                Ok(total)
            }
            (Decomposition::Cp(d), DataTensor::Dense(x)) => {
                let rec = reconstruct_cp(d)?;
                if rec.shape() != x.shape() {
                    return Err(CmtfError::Dimension("CP model does not match data".into()));
                }
                Ok(Zip::from(x.data())
                    .and(rec.data())
                    .fold(0.0, |acc, a, b| acc + (a - b) * (a - b)))
            }
            (Decomposition::Matrix(d), DataTensor::Matrix(y)) => {
                let rec = d.reconstruct();
                if rec.dim() != y.dim() {
                    return Err(CmtfError::Dimension("matrix model does not match data".into()));
                }
                Ok(Zip::from(y).and(&rec).fold(0.0, |acc, a, b| acc + (a - b) * (a - b)))
            }
            _ => Err(CmtfError::Dimension("decomposition kind does not match data layout".into())),
        }
    }
}
