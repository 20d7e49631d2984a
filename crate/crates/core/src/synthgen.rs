//! Seeded generators for the simulated fusion experiments.

use std::path::Path;

use nalgebra::DMatrix;
use ndarray::{s, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{CmtfError, Result};
use crate::io::{write_data, write_matrix_csv};
use crate::linalg::from_nalgebra;
use crate::tensor::{
    normalize_to_unit_norm, reconstruct_cp, reconstruct_parafac2, CpDecomposition, DataTensor, Decomposition,
    DenseTensor3, FrobeniusNorm, MatrixDecomposition, Parafac2Decomposition, RaggedTensor,
};

/// Shared first-mode size of the first two experiments.
pub const EXP1_ROWS: usize = 40;
pub const EXP1_SLICE_WIDTH: usize = 120;
pub const EXP1_SLICES: usize = 50;
pub const EXP1_MATRIX_COLS: usize = 60;
pub const EXP_RANK: usize = 3;

pub const EXP2_CLUSTERS: usize = 4;
const EXP2_CLUSTER_SIZE: usize = 10;
const EXP2_CLUSTER_SPREAD: f64 = 0.2;
const EXP2_SHRINK: (usize, usize) = (40, 10);
const EXP2_WINDOW: usize = 20;
const EXP2_GROW: (usize, usize) = (10, 40);
const EXP2_DECAY: f64 = 0.5;
const EXP2_LOGISTIC_SLOPE: f64 = 10.0;

pub const EXP3_ROWS: usize = 30;
pub const EXP3_SLICE_WIDTH: usize = 200;
pub const EXP3_SLICES: usize = 30;
pub const EXP3_CP_SHAPE: [usize; 3] = [30, 20, 50];
pub const EXP3_DICTIONARY_COLS: usize = 4;
pub const EXP3_NOISE: f64 = 0.5;
/// Dictionary columns used by the PARAFAC2 and CP first modes.
pub const EXP3_SELECT_A: [usize; 3] = [0, 1, 2];
pub const EXP3_SELECT_E: [usize; 3] = [0, 1, 3];
const EXP3_BUMP_CENTERS: [f64; 3] = [55.0, 100.0, 145.0];
const EXP3_BUMP_DRIFT: f64 = 0.5;
const EXP3_BUMP_WIDTH: f64 = 30.0;

/// True factors behind a synthetic problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// One decomposition per dataset, in dataset order.
    pub decompositions: Vec<Decomposition>,
    /// Cluster label of every first-mode row.
    pub labels: Option<Vec<usize>>,
    /// First-mode factor before perturbation.
    pub clean_a: Option<Array2<f64>>,
    pub dictionary: Option<Array2<f64>>,
}

/// Generated datasets (noisy and normalized) with their ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProblem {
    pub names: Vec<String>,
    pub datasets: Vec<DataTensor>,
    pub truth: GroundTruth,
}

impl SyntheticProblem {
    /// Writes every dataset and true factor under `dir`.
    pub fn dump(&self, dir: &Path) -> Result<()> {
        for (name, data) in self.names.iter().zip(&self.datasets) {
            write_data(dir, name, data)?;
        }
        let truth_dir = dir.join("truth");
        std::fs::create_dir_all(&truth_dir).map_err(|e| CmtfError::io(&truth_dir, e))?;
        for (name, dec) in self.names.iter().zip(&self.truth.decompositions) {
            write_decomposition(&truth_dir, name, dec)?;
        }
        if let Some(a) = &self.truth.clean_a {
            write_matrix_csv(&truth_dir.join("clean_A.csv"), a)?;
        }
        if let Some(d) = &self.truth.dictionary {
            write_matrix_csv(&truth_dir.join("dictionary.csv"), d)?;
        }
        if let Some(labels) = &self.truth.labels {
            let col = Array2::from_shape_fn((labels.len(), 1), |(i, _)| labels[i] as f64);
            crate::io::write_table_csv(&truth_dir.join("labels.csv"), &["label".to_string()], &col)?;
        }
        Ok(())
    }
}

/// Writes the factors of `dec` as `<name>_<mode>.csv`; PARAFAC2 `B_k` go to
/// `<name>_B/slice_NNN.csv`.
pub fn write_decomposition(dir: &Path, name: &str, dec: &Decomposition) -> Result<()> {
    let file = |mode: &str| dir.join(format!("{name}_{mode}.csv"));
    match dec {
        Decomposition::Parafac2(d) => {
            write_matrix_csv(&file("A"), &d.a)?;
            write_matrix_csv(&file("C"), &d.c)?;
            let bdir = dir.join(format!("{name}_B"));
            std::fs::create_dir_all(&bdir).map_err(|e| CmtfError::io(&bdir, e))?;
            for (k, bk) in d.b.iter().enumerate() {
                write_matrix_csv(&bdir.join(crate::io::slice_file_name(k)), bk)?;
            }
        }
        Decomposition::Cp(d) => {
            for (m, f) in ["E", "F", "G"].iter().zip(&d.factors) {
                write_matrix_csv(&file(m), f)?;
            }
        }
        Decomposition::Matrix(d) => {
            write_matrix_csv(&file("E"), &d.e)?;
            write_matrix_csv(&file("F"), &d.f)?;
        }
    }
    Ok(())
}

fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>())
}

fn noise_like<R: Rng + ?Sized>(data: &DataTensor, rng: &mut R) -> DataTensor {
    match data {
        DataTensor::Ragged(x) => {
            let slices = x.slices().iter().map(|s| standard_normal(s.nrows(), s.ncols(), rng)).collect();
            DataTensor::Ragged(RaggedTensor::new(slices).expect("same shape as a valid tensor"))
        }
        DataTensor::Dense(x) => {
            let d = x.data().map(|_| StandardNormal.sample(rng));
            DataTensor::Dense(DenseTensor3::new(d).expect("same shape as a valid tensor"))
        }
        DataTensor::Matrix(y) => DataTensor::Matrix(standard_normal(y.nrows(), y.ncols(), rng)),
    }
}

fn axpy(x: &DataTensor, alpha: f64, n: &DataTensor) -> DataTensor {
    match (x, n) {
        (DataTensor::Ragged(x), DataTensor::Ragged(n)) => {
            let slices = x.slices().iter().zip(n.slices()).map(|(a, b)| a + &(b * alpha)).collect();
            DataTensor::Ragged(RaggedTensor::new(slices).expect("same shape as a valid tensor"))
        }
        (DataTensor::Dense(x), DataTensor::Dense(n)) => {
            DataTensor::Dense(DenseTensor3::new(x.data() + &(n.data() * alpha)).expect("same shape"))
        }
        (DataTensor::Matrix(x), DataTensor::Matrix(n)) => DataTensor::Matrix(x + &(n * alpha)),
        _ => unreachable!("noise is drawn with the layout of the data"),
    }
}

/// `X + η (‖X‖/‖N‖) N` with standard normal `N`.
pub fn add_noise<R: Rng + ?Sized>(data: &DataTensor, eta: f64, rng: &mut R) -> Result<DataTensor> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(CmtfError::InvalidArgument(format!("noise level must be >= 0, got {eta}")));
    }
    if eta == 0.0 {
        return Ok(data.clone());
    }
    let xn = data.frob_norm();
    if xn == 0.0 {
        return Err(CmtfError::InvalidArgument("noise relative to zero-norm data".into()));
    }
    let noise = noise_like(data, rng);
    let nn = noise.frob_norm();
    Ok(axpy(data, eta * xn / nn, &noise))
}

/// Matrix version of [`add_noise`].
pub fn add_noise_matrix<R: Rng + ?Sized>(m: &Array2<f64>, eta: f64, rng: &mut R) -> Result<Array2<f64>> {
    match add_noise(&DataTensor::Matrix(m.clone()), eta, rng)? {
        DataTensor::Matrix(out) => Ok(out),
        _ => unreachable!(),
    }
}

/// `B_k = P_k ΔB` with orthonormal `P_k` (thin QR of a standard normal
/// matrix) and one standard normal `ΔB`.
pub fn gen_parafac2_bks<R: Rng + ?Sized>(j: usize, k: usize, r: usize, rng: &mut R) -> Result<Vec<Array2<f64>>> {
    if j < r || r == 0 || k == 0 {
        return Err(CmtfError::InvalidArgument(format!(
            "need K >= 1 and J >= R >= 1, got J={j}, K={k}, R={r}"
        )));
    }
    let delta = standard_normal(r, r, rng);
    Ok((0..k)
        .map(|_| {
            let g = standard_normal(j, r, rng);
            let q = DMatrix::from_row_slice(j, r, g.as_slice().expect("standard layout")).qr().q();
            from_nalgebra(&q).dot(&delta)
        })
        .collect())
}

/// Normalizes `data` and divides the last mode of its true model by the same
/// norm, so the truth reproduces the normalized data.
fn normalized(data: DataTensor, truth: &mut Decomposition) -> Result<DataTensor> {
    let (unit, norm) = normalize_to_unit_norm(&data)?;
    match truth {
        Decomposition::Parafac2(d) => d.c /= norm,
        Decomposition::Cp(d) => d.factors[2] /= norm,
        Decomposition::Matrix(d) => d.f /= norm,
    }
    Ok(unit)
}

fn parafac2_data(dec: &Parafac2Decomposition) -> Result<DataTensor> {
    Ok(DataTensor::Ragged(reconstruct_parafac2(dec)?))
}

/// Exact coupling `A = E`, non-negative factors; noise level `eta` on both
/// datasets before normalization.
pub fn gen_experiment1<R: Rng + ?Sized>(eta: f64, rng: &mut R) -> Result<SyntheticProblem> {
    let a = uniform(EXP1_ROWS, EXP_RANK, rng);
    // identical non-negative B_k satisfy the cross-product constraint exactly
    let b0 = uniform(EXP1_SLICE_WIDTH, EXP_RANK, rng);
    let c = uniform(EXP1_SLICES, EXP_RANK, rng) + 0.1;
    let f = uniform(EXP1_MATRIX_COLS, EXP_RANK, rng);
    let x_true = Parafac2Decomposition::new(a.clone(), vec![b0; EXP1_SLICES], c)?;
    let y_true = MatrixDecomposition::new(a, f)?;
    let x = add_noise(&parafac2_data(&x_true)?, eta, rng)?;
    let y = add_noise(&DataTensor::Matrix(y_true.reconstruct()), eta, rng)?;
    let mut truth = vec![Decomposition::Parafac2(x_true), Decomposition::Matrix(y_true)];
    let x = normalized(x, &mut truth[0])?;
    let y = normalized(y, &mut truth[1])?;
    Ok(SyntheticProblem {
        names: vec!["X".into(), "Y".into()],
        datasets: vec![x, y],
        truth: GroundTruth {
            decompositions: truth,
            labels: None,
            clean_a: None,
            dictionary: None,
        },
    })
}

fn interpolate(range: (usize, usize), k: usize, slices: usize) -> usize {
    let t = if slices > 1 { k as f64 / (slices - 1) as f64 } else { 0.0 };
    (range.0 as f64 + t * (range.1 as f64 - range.0 as f64)).round() as usize
}

/// Shrinking, shifting and growing networks: indicator columns over the
/// `width` nodes with unit norm.
pub fn evolving_networks(width: usize, slices: usize) -> Vec<Array2<f64>> {
    (0..slices)
        .map(|k| {
            let mut b = Array2::<f64>::zeros((width, EXP_RANK));
            let shrink = interpolate(EXP2_SHRINK, k, slices).min(width);
            b.slice_mut(s![..shrink, 0]).fill(1.0);
            let start = interpolate((0, width - EXP2_WINDOW), k, slices);
            b.slice_mut(s![start..start + EXP2_WINDOW, 1]).fill(1.0);
            let grow = interpolate(EXP2_GROW, k, slices).min(width);
            b.slice_mut(s![width - grow.., 2]).fill(1.0);
            for mut col in b.axis_iter_mut(Axis(1)) {
                let n = col.dot(&col).sqrt();
                col /= n;
            }
            b
        })
        .collect()
}

/// Exponential decay, logistic rise and a uniform random curve over the slices.
fn temporal_patterns<R: Rng + ?Sized>(slices: usize, rng: &mut R) -> Array2<f64> {
    let mut c = Array2::zeros((slices, EXP_RANK));
    for k in 0..slices {
        let t = if slices > 1 { k as f64 / (slices - 1) as f64 } else { 0.0 };
        c[[k, 0]] = (-t / EXP2_DECAY).exp();
        c[[k, 1]] = 1.0 / (1.0 + (-EXP2_LOGISTIC_SLOPE * (t - 0.5)).exp());
    }
    for k in 0..slices {
        c[[k, 2]] = rng.random::<f64>();
    }
    c
}

/// First-mode factor with four clusters in the first two columns and
/// per-row cluster labels.
fn clustered_first_mode<R: Rng + ?Sized>(rng: &mut R) -> (Array2<f64>, Vec<usize>) {
    const CENTROIDS: [(f64, f64); EXP2_CLUSTERS] = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
    let rows = EXP2_CLUSTERS * EXP2_CLUSTER_SIZE;
    let jitter = Normal::new(0.0, EXP2_CLUSTER_SPREAD).expect("positive spread");
    let labels: Vec<usize> = (0..rows).map(|i| i / EXP2_CLUSTER_SIZE).collect();
    let mut a = Array2::zeros((rows, EXP_RANK));
    for (i, &l) in labels.iter().enumerate() {
        a[[i, 0]] = CENTROIDS[l].0 + jitter.sample(rng);
        a[[i, 1]] = CENTROIDS[l].1 + jitter.sample(rng);
    }
    for i in 0..rows {
        a[[i, 2]] = rng.random::<f64>();
    }
    (a, labels)
}

/// Evolving networks coupled to a static matrix; `A` is perturbed with
/// noise level `eta` before building the tensor. No noise is added to the
/// datasets themselves.
pub fn gen_experiment2<R: Rng + ?Sized>(eta: f64, rng: &mut R) -> Result<SyntheticProblem> {
    let (a_clean, labels) = clustered_first_mode(rng);
    let b = evolving_networks(EXP1_SLICE_WIDTH, EXP1_SLICES);
    let c = temporal_patterns(EXP1_SLICES, rng);
    let f = uniform(EXP1_MATRIX_COLS, EXP_RANK, rng);
    let a_noisy = add_noise_matrix(&a_clean, eta, rng)?;
    let x_true = Parafac2Decomposition::new(a_noisy, b, c)?;
    let y_true = MatrixDecomposition::new(a_clean.clone(), f)?;
    let x = parafac2_data(&x_true)?;
    let y = DataTensor::Matrix(y_true.reconstruct());
    let mut truth = vec![Decomposition::Parafac2(x_true), Decomposition::Matrix(y_true)];
    let x = normalized(x, &mut truth[0])?;
    let y = normalized(y, &mut truth[1])?;
    Ok(SyntheticProblem {
        names: vec!["X".into(), "Y".into()],
        datasets: vec![x, y],
        truth: GroundTruth {
            decompositions: truth,
            labels: Some(labels),
            clean_a: Some(a_clean),
            dictionary: None,
        },
    })
}

/// Gaussian bumps whose centers drift with the slice index.
pub fn smooth_bumps(width: usize, slices: usize) -> Vec<Array2<f64>> {
    (0..slices)
        .map(|k| {
            Array2::from_shape_fn((width, EXP_RANK), |(j, r)| {
                let center = EXP3_BUMP_CENTERS[r] + EXP3_BUMP_DRIFT * k as f64;
                let z = (j as f64 - center) / EXP3_BUMP_WIDTH;
                (-0.5 * z * z).exp()
            })
        })
        .collect()
}

fn select_columns(m: &Array2<f64>, cols: &[usize]) -> Array2<f64> {
    m.select(Axis(1), cols)
}

/// Partial coupling through a four-column dictionary, smooth `B_k`, and a
/// CP tensor; noise level 0.5 on both datasets.
pub fn gen_experiment3<R: Rng + ?Sized>(rng: &mut R) -> Result<SyntheticProblem> {
    gen_experiment3_with_noise(EXP3_NOISE, rng)
}

/// [`gen_experiment3`] with another noise level.
pub fn gen_experiment3_with_noise<R: Rng + ?Sized>(eta: f64, rng: &mut R) -> Result<SyntheticProblem> {
    let [ci, cj, ck] = EXP3_CP_SHAPE;
    let delta = standard_normal(EXP3_ROWS, EXP3_DICTIONARY_COLS, rng);
    let a = select_columns(&delta, &EXP3_SELECT_A);
    let e = select_columns(&delta, &EXP3_SELECT_E);
    let b = smooth_bumps(EXP3_SLICE_WIDTH, EXP3_SLICES);
    let c = uniform(EXP3_SLICES, EXP_RANK, rng) + 0.1;
    let f = standard_normal(cj, EXP_RANK, rng);
    let g = standard_normal(ck, EXP_RANK, rng);
    debug_assert_eq!(ci, EXP3_ROWS);
    let x_true = Parafac2Decomposition::new(a, b, c)?;
    let y_true = CpDecomposition::new([e, f, g])?;
    let x = add_noise(&parafac2_data(&x_true)?, eta, rng)?;
    let y = add_noise(&DataTensor::Dense(reconstruct_cp(&y_true)?), eta, rng)?;
    let mut truth = vec![Decomposition::Parafac2(x_true), Decomposition::Cp(y_true)];
    let x = normalized(x, &mut truth[0])?;
    let y = normalized(y, &mut truth[1])?;
    Ok(SyntheticProblem {
        names: vec!["X".into(), "Y".into()],
        datasets: vec![x, y],
        truth: GroundTruth {
            decompositions: truth,
            labels: None,
            clean_a: None,
            dictionary: Some(delta),
        },
    })
}
